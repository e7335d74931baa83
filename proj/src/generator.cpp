#include "flpflow/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace flpflow {

void GeneratorSpec::validate() const {
    if (num_points < 1 || num_facilities < 1 || num_points < num_facilities)
        throw SpecError("need num_points >= num_facilities >= 1");
    if (cluster_proportions.empty()) throw SpecError("at least one cluster proportion is required");
    if (std::any_of(cluster_proportions.begin(), cluster_proportions.end(), [](double p) { return !(p >= 0); }))
        throw SpecError("cluster proportions must be nonnegative");
    const double total = std::accumulate(cluster_proportions.begin(), cluster_proportions.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream os;
        os << "cluster proportions sum to " << total << ", expected 1";
        throw SpecError(os.str());
    }
    if (static_cast<int>(capacity_upper.size()) != num_facilities)
        throw SpecError("capacity_upper needs one entry per facility");
    if (!capacity_lower.empty() && static_cast<int>(capacity_lower.size()) != num_facilities)
        throw SpecError("capacity_lower needs one entry per facility (or none)");
    if (!(area_width > 0 && area_height > 0 && cluster_std > 0)) throw SpecError("area and spread must be positive");
}

Instance generate_instance(const GeneratorSpec& spec) {
    spec.validate();
    const int n = spec.num_points;
    const int m = spec.num_facilities;
    const int k = static_cast<int>(spec.cluster_proportions.size());

    // cluster sizes: floors, then the remainder by largest fractional part
    std::vector<int> sizes(k);
    std::vector<std::pair<double, int>> frac;
    int assigned = 0;
    for (int c = 0; c < k; ++c) {
        const double exact = spec.cluster_proportions[c] * n;
        sizes[c] = static_cast<int>(std::floor(exact));
        assigned += sizes[c];
        frac.emplace_back(exact - sizes[c], c);
    }
    std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int r = 0; r < n - assigned; ++r) ++sizes[frac[r % k].second];

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> ux(0.0, spec.area_width);
    std::uniform_real_distribution<double> uy(0.0, spec.area_height);
    std::normal_distribution<double> nd(0.0, spec.cluster_std);
    std::vector<std::pair<double, double>> centers(k);
    for (auto& c : centers) {
        c.first = ux(rng);
        c.second = uy(rng);
    }

    Instance inst;
    inst.points.resize(n, 2);
    int row = 0;
    for (int c = 0; c < k; ++c) {
        for (int s = 0; s < sizes[c]; ++s, ++row) {
            inst.points(row, 0) = centers[c].first + nd(rng);
            inst.points(row, 1) = centers[c].second + nd(rng);
        }
    }
    inst.weights = VectorXd::Constant(n, 1.0 / n);
    inst.facility_count = m;
    inst.consumption = MatrixXd::Ones(n, m);
    // fractions of total demand sum_i p_i c_ij (= 1 for unit consumption)
    const VectorXd demand = inst.consumption.transpose() * inst.weights;
    inst.upper_bounds.resize(m);
    inst.lower_bounds = VectorXd::Zero(m);
    for (int j = 0; j < m; ++j) {
        inst.upper_bounds(j) = spec.capacity_upper[j] * demand(j);
        if (!spec.capacity_lower.empty()) inst.lower_bounds(j) = spec.capacity_lower[j] * demand(j);
    }
    return inst;
}

}  // namespace flpflow
