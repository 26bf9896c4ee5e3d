#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimdm/errors.hpp"
#include "mimdm/rng.hpp"

namespace mimdm {

inline std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

// Dense row-major tensor, 64-bit values, optional same-shape gradient.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad; // empty, or same size as values

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        values.assign(static_cast<std::size_t>(shape_size(shape)), 0.0);
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.values.begin(), t.values.end(), v);
        return t;
    }

    static Tensor randn(std::vector<int> s, Rng& rng, double stddev) {
        Tensor t(std::move(s));
        for (double& v : t.values) v = rng.normal(0.0, stddev);
        return t;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }

    // 2-D view helpers; 1-D tensors are treated as a single row
    int rows() const { return shape.size() >= 2 ? shape[0] : 1; }
    int cols() const {
        if (shape.empty()) return 0;
        return shape.size() >= 2 ? shape[1] : shape[0];
    }

    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols() + c]; }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }

    void zero_grad() { grad.assign(values.size(), 0.0); }
};

// Named parameters plus Adam moment buffers. Iteration order is insertion
// order everywhere (checkpoints depend on it).
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw UsageError("duplicate parameter: " + name);
        index_[name] = entries_.size();
        entries_.push_back(Entry{name, std::move(t), {}, {}});
        Entry& e = entries_.back();
        e.tensor.ensure_grad();
        return e.tensor;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& operator[](const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return entries_[it->second].tensor;
    }

    const Tensor& operator[](const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return entries_[it->second].tensor;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.name);
        return out;
    }

    std::size_t count() const { return entries_.size(); }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

    long step() const { return step_; }
    void set_step(long s) { step_ = s; }

    // Standard Adam with bias correction; gradients must be populated.
    void adam_step(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8) {
        ++step_;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        for (auto& e : entries_) {
            e.tensor.ensure_grad();
            if (e.m.values.size() != e.tensor.values.size()) {
                e.m = Tensor::zeros(e.tensor.shape);
                e.v = Tensor::zeros(e.tensor.shape);
            }
            const std::size_t n = e.tensor.values.size();
            for (std::size_t i = 0; i < n; ++i) {
                const double g = e.tensor.grad[i];
                e.m.values[i] = beta1 * e.m.values[i] + (1.0 - beta1) * g;
                e.v.values[i] = beta2 * e.v.values[i] + (1.0 - beta2) * g * g;
                const double mhat = e.m.values[i] / c1;
                const double vhat = e.v.values[i] / c2;
                e.tensor.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

private:
    struct Entry {
        std::string name;
        Tensor tensor;
        Tensor m, v;
    };

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    long step_ = 0;
};

} // namespace mimdm
