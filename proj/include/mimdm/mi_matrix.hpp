#pragma once

#include <algorithm>
#include <ostream>
#include <vector>

#include "json.hpp"

#include "mimdm/errors.hpp"

namespace mimdm {

// Symmetric non-negative matrix of pairwise conditional MI in nats, defined
// over a masked index set. Diagonal is 0 by convention; rows/columns outside
// the masked set are 0.
struct MIMatrix {
    int n = 0;
    std::vector<double> values;  // n x n
    std::vector<int> masked_set; // sorted

    MIMatrix() = default;
    MIMatrix(int size, std::vector<int> masked)
        : n(size), values(static_cast<std::size_t>(size) * size, 0.0),
          masked_set(std::move(masked)) {
        std::sort(masked_set.begin(), masked_set.end());
    }

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * n + j]; }
    double& at(int i, int j) { return values[static_cast<std::size_t>(i) * n + j]; }

    // (M + M^T)/2, clamp negatives to 0, zero the diagonal
    void symmetrize_clamp() {
        for (int i = 0; i < n; ++i) {
            at(i, i) = 0.0;
            for (int j = i + 1; j < n; ++j) {
                const double s = 0.5 * (at(i, j) + at(j, i));
                const double v = s > 0.0 ? s : 0.0;
                at(i, j) = v;
                at(j, i) = v;
            }
        }
    }

    double max_abs_diff(const MIMatrix& other) const {
        if (other.n != n) throw ShapeError("MIMatrix: size mismatch");
        double worst = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k)
            worst = std::max(worst, std::fabs(values[k] - other.values[k]));
        return worst;
    }

    // one row per unordered masked pair: "i,j,nats"
    void write_triplet_csv(std::ostream& out) const {
        out << "i,j,nats\n";
        for (std::size_t a = 0; a < masked_set.size(); ++a)
            for (std::size_t b = a + 1; b < masked_set.size(); ++b) {
                const int i = masked_set[a], j = masked_set[b];
                out << i << ',' << j << ',' << at(i, j) << '\n';
            }
    }

    nlohmann::json to_dense_json() const {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < n; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int j = 0; j < n; ++j) row.push_back(at(i, j));
            rows.push_back(std::move(row));
        }
        return nlohmann::json{{"n", n}, {"masked_set", masked_set}, {"values", rows}};
    }

    static MIMatrix from_dense_json(const nlohmann::json& j) {
        MIMatrix m(j.at("n").get<int>(), j.at("masked_set").get<std::vector<int>>());
        const auto& rows = j.at("values");
        for (int i = 0; i < m.n; ++i)
            for (int c = 0; c < m.n; ++c) m.at(i, c) = rows.at(i).at(c).get<double>();
        return m;
    }
};

} // namespace mimdm
