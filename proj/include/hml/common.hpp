#ifndef HML_COMMON_HPP
#define HML_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

namespace hml {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Deterministic pseudo-random stream. std::uniform_real_distribution is
// implementation-defined, so probe points are derived from the raw engine
// output to keep byte-identical results across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    double uniform() {
        // splitmix64 step
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    Vec uniform_vec(int n, double a, double b) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(a, b);
        return v;
    }

  private:
    std::uint64_t state_;
};

inline double sqr(double x) { return x * x; }

} // namespace hml

#endif
