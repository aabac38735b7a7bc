#pragma once

#include "ingsl/tensor.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ingsl {

/// A differentiable computation together with the point to probe it at.
struct GradInstance {
    ScalarFunction f;
    std::vector<Matrix> inputs;
};

/// Named generator of random instances; each call draws a fresh point that
/// stays clear of relu kinks and top-K / threshold decision boundaries.
struct GradCase {
    std::string name;
    std::function<GradInstance(std::mt19937_64&)> make;
};

struct GradRow {
    std::string name;
    int trials = 0;
    double max_error = 0.0;
    bool passed = false;
};

inline constexpr double kGradTolerance = 1e-4;

/// One case per differentiable operation, including sparse edge values,
/// the scorers, pruning, the MI loss and the full training objective.
std::vector<GradCase> default_gradcheck_cases();

/// Every case evaluated at `trials` random instances (step 1e-5).
std::vector<GradRow> run_gradcheck(const std::vector<GradCase>& cases, int trials, std::uint64_t seed);

}  // namespace ingsl
