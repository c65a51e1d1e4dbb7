#ifndef FPME_HARNESS_STATS_HPP
#define FPME_HARNESS_STATS_HPP

#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

namespace fpme::harness {

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double variance = 0.0; // unbiased
    double stderr_ = 0.0;
};

inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.count = xs.size();
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        for (double x : xs) s.variance += (x - s.mean) * (x - s.mean);
        s.variance /= static_cast<double>(xs.size() - 1);
        s.stderr_ = std::sqrt(s.variance / static_cast<double>(xs.size()));
    }
    return s;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope needs two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Upper confidence bound for a variance from a sample variance with k = count - 1 degrees of freedom.
inline double variance_upper_bound(double sample_variance, std::size_t count, double confidence) {
    boost::math::chi_squared chi(static_cast<double>(count - 1));
    return static_cast<double>(count - 1) * sample_variance / boost::math::quantile(chi, 1.0 - confidence);
}

/// Lower confidence bound, same convention.
inline double variance_lower_bound(double sample_variance, std::size_t count, double confidence) {
    boost::math::chi_squared chi(static_cast<double>(count - 1));
    return static_cast<double>(count - 1) * sample_variance / boost::math::quantile(chi, confidence);
}

/**
 * Runs body(i) for i in [0, count) on `threads` workers. Each index writes its
 * own result slot, so the outcome does not depend on scheduling.
 */
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace fpme::harness

#endif
