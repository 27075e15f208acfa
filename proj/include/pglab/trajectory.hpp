#ifndef PGLAB_TRAJECTORY_HPP_
#define PGLAB_TRAJECTORY_HPP_

#include <vector>

#include "pglab/diffcore.hpp"

namespace pglab {

// One environment step. `eps` is the base noise that reparameterizes `a`;
// an empty `eps` means it was not recorded and must be recovered by inversion.
struct Transition {
  Vector s;
  Vector a;
  Vector eps;
  double r = 0.0;
  Vector s_next;
  bool terminal = false;   // true end of the task: no value beyond s_next
  bool truncated = false;  // horizon cutoff of a continuing task: bootstrap v(s_next)
};

struct Trajectory {
  std::vector<Transition> steps;

  std::size_t size() const { return steps.size(); }
  double total_reward() const {
    double g = 0.0;
    for (const auto& t : steps) g += t.r;
    return g;
  }
};

}  // namespace pglab

#endif  // PGLAB_TRAJECTORY_HPP_
