#pragma once

#include <ostream>

namespace artic {

/// Runs the built-in oracle checks (model values, QP vs enumeration, RK4
/// sensitivities vs finite differences, ISL exactness, determinism) and
/// prints one line per check. Returns the number of failures.
int selftest(std::ostream& os);

}  // namespace artic
