#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fbsc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Number of worker threads used by parallel loops. Override with the
/// FBSC_THREADS environment variable; 1 disables threading.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on a static partition of worker threads.
/// Results must be written to disjoint slots so the outcome is identical
/// for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// FNV-1a 64-bit hash, used for config manifests.
std::uint64_t fnv1a64(const std::string& bytes);

/// Shortest decimal form that round-trips a double (%.17g).
std::string format_double(double v);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fbsc
