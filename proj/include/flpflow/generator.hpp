#pragma once

#include <cstdint>
#include <vector>

#include "flpflow/core.hpp"

namespace flpflow {

/// Clustered demand in a rectangle. Capacity vectors are fractions of the
/// total demand and have one entry per facility; an empty lower vector means
/// all-zero lower bounds.
struct GeneratorSpec {
    int num_points = 400;
    int num_facilities = 4;
    std::vector<double> cluster_proportions{0.09, 0.32, 0.19, 0.40};
    double area_width = 40.0;
    double area_height = 40.0;
    double cluster_std = 2.0;
    std::vector<double> capacity_upper{0.20, 0.41, 0.27, 0.20};
    std::vector<double> capacity_lower;
    std::uint64_t seed = 0;

    /// Throws SpecError.
    void validate() const;
};

/// Seeded sampling: cluster centers uniform in the area, points Gaussian
/// around them, weights 1/N, unit consumption, bounds = fraction * total demand.
Instance generate_instance(const GeneratorSpec& spec);

}  // namespace flpflow
