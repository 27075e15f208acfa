#ifndef PGLAB_PGLAB_HPP_
#define PGLAB_PGLAB_HPP_

#include "pglab/algorithms.hpp"
#include "pglab/analysis.hpp"
#include "pglab/bandit_oracle.hpp"
#include "pglab/config.hpp"
#include "pglab/diffcore.hpp"
#include "pglab/envs.hpp"
#include "pglab/estimators.hpp"
#include "pglab/gradcheck.hpp"
#include "pglab/io.hpp"
#include "pglab/lqg_oracle.hpp"
#include "pglab/parallel.hpp"
#include "pglab/policy.hpp"
#include "pglab/returns.hpp"
#include "pglab/rng.hpp"
#include "pglab/runner.hpp"
#include "pglab/trajectory.hpp"

#endif  // PGLAB_PGLAB_HPP_
