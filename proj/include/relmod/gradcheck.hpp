#ifndef RELMOD_GRADCHECK_HPP
#define RELMOD_GRADCHECK_HPP

#include <string>
#include <vector>

#include "relmod/config.hpp"

namespace relmod {

struct GradCheckGroup {
    std::string name;
    double max_rel_err = 0.0;
    int n_params = 0;
};

struct GradCheckReport {
    std::vector<GradCheckGroup> groups;
    double worst = 0.0;
    double step = 0.0;

    std::string to_json_string() const;
    std::string to_table() const;
};

/// Compares analytic joint-loss gradients against central finite differences
/// for every parameter of a model built from `cfg`, on a fixed two-example
/// micro batch (one answerable, one unanswerable with a plausible span).
/// Errors are grouped by parameter-name prefix.
GradCheckReport gradcheck(const RunConfig& cfg, double step = 1e-5);

/// A run configuration small enough for finite differences (dims <= 8).
RunConfig gradcheck_micro_config();

}  // namespace relmod

#endif  // RELMOD_GRADCHECK_HPP
