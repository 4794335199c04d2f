#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qcnn/training.hpp"

namespace qclass {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitCheckFailed = 3,
};

struct RunHooks {
  // Test-only: corrupts analytic gradients inside `gradcheck`.
  qcnn::GradientMutator gradient_mutator;
};

/// Entry point behind the `qclass` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err, const RunHooks& hooks = {});

}  // namespace qclass
