#include "stats.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "error.hpp"

namespace dmrm {

PairedTTest paired_ttest(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "paired samples differ in length");
    require(a.size() >= 2, "need at least two pairs");
    PairedTTest r;
    r.n = static_cast<int>(a.size());

    double mean = 0.0;
    for (int i = 0; i < r.n; ++i) mean += a[i] - b[i];
    mean /= r.n;
    r.mean_diff = mean;

    double ss = 0.0;
    for (int i = 0; i < r.n; ++i) {
        const double d = (a[i] - b[i]) - mean;
        ss += d * d;
    }
    const double sd = std::sqrt(ss / (r.n - 1));
    r.df = r.n - 1;

    if (sd == 0.0) {
        r.t_stat = mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity() * (mean > 0 ? 1 : -1);
        r.p_value = mean == 0.0 ? 1.0 : 0.0;
        return r;
    }

    r.t_stat = mean / (sd / std::sqrt(static_cast<double>(r.n)));
    boost::math::students_t dist(r.df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_stat)));
    return r;
}

}  // namespace dmrm
