#pragma once

#include <vector>

namespace dmrm {

struct PairedTTest {
    int n = 0;
    double mean_diff = 0.0;
    double t_stat = 0.0;
    double df = 0.0;
    double p_value = 1.0;  // two-sided
};

// Two-sided paired t-test on matched samples. Degenerate zero-variance
// differences give p = 1 when the mean difference is zero and p = 0
// otherwise.
PairedTTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace dmrm
