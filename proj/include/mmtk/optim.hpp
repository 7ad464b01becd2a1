// optim.hpp
// Named parameter store, AdamW with decoupled weight decay, and a central
// finite-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mmtk/tensor.hpp"

namespace mmtk {

struct OptimHyper {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t) {
        require(!params_.count(name), "param '" + name + "' already registered");
        t.raw().requires_grad = true;
        auto [it, ok] = params_.emplace(name, std::move(t));
        (void)ok;
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        require(it != params_.end(), "unknown param '" + name + "'");
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        require(it != params_.end(), "unknown param '" + name + "'");
        return it->second;
    }

    // deterministic (name-sorted) iteration order
    std::map<std::string, Tensor>& all() { return params_; }
    const std::map<std::string, Tensor>& all() const { return params_; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [k, v] : params_) out.push_back(k);
        return out;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& [k, v] : params_) n += v.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [k, v] : params_) v.zero_grad();
    }

private:
    std::map<std::string, Tensor> params_;
};

class AdamW {
public:
    explicit AdamW(OptimHyper hy = {}) : hy_(hy) {
        require(hy_.lr >= 0.0 && hy_.eps > 0.0, "adamw: lr must be non-negative, eps positive");
        require(0.0 <= hy_.beta1 && hy_.beta1 < 1.0 && 0.0 <= hy_.beta2 && hy_.beta2 < 1.0,
                "adamw: betas must lie in [0,1)");
        require(hy_.weight_decay >= 0.0, "adamw: weight decay must be non-negative");
    }

    const OptimHyper& hyper() const { return hy_; }
    void set_lr(double lr) {
        require(lr >= 0.0, "adamw: lr must be non-negative");
        hy_.lr = lr;
    }

    // One update over every parameter that accumulated a gradient.
    void step(ParamStore& ps) {
        for (auto& [name, p] : ps.all()) {
            if (!p.has_grad()) continue;
            State& st = state_[name];
            if (st.m.empty()) {
                st.m.assign(p.numel(), 0.0);
                st.v.assign(p.numel(), 0.0);
            }
            require(st.m.size() == p.numel(), "adamw: state size mismatch for '" + name + "'");
            st.t += 1;
            const double bc1 = 1.0 - std::pow(hy_.beta1, static_cast<double>(st.t));
            const double bc2 = 1.0 - std::pow(hy_.beta2, static_cast<double>(st.t));
            double* w = p.ptr();
            const std::vector<double>& g = p.raw().grad;
            for (std::size_t i = 0; i < p.numel(); ++i) {
                require(std::isfinite(g[i]), "adamw: non-finite gradient in '" + name + "'");
                st.m[i] = hy_.beta1 * st.m[i] + (1.0 - hy_.beta1) * g[i];
                st.v[i] = hy_.beta2 * st.v[i] + (1.0 - hy_.beta2) * g[i] * g[i];
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                w[i] -= hy_.lr * (mhat / (std::sqrt(vhat) + hy_.eps) + hy_.weight_decay * w[i]);
                require(std::isfinite(w[i]), "adamw: parameter '" + name + "' became non-finite");
            }
        }
    }

private:
    struct State {
        std::vector<double> m, v;
        long t = 0;
    };
    OptimHyper hy_;
    std::map<std::string, State> state_;
};

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
    bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central-difference check of d(loss)/d(theta) on sampled entries of every
// parameter. loss_fn must rebuild the graph from current parameter values.
inline GradCheckReport gradient_check(ParamStore& ps, const std::function<Tensor()>& loss_fn,
                                      int samples_per_param, Rng& rng) {
    require(samples_per_param > 0, "gradient_check: need at least one sample per param");
    ps.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);

    std::map<std::string, std::vector<double>> analytic;
    for (auto& [name, p] : ps.all())
        analytic[name] = p.has_grad() ? p.raw().grad : std::vector<double>(p.numel(), 0.0);

    GradCheckReport report;
    for (auto& [name, p] : ps.all()) {
        GradCheckEntry entry{name, 0.0, 0};
        const std::size_t n = p.numel();
        std::vector<std::size_t> idx;
        if (n <= static_cast<std::size_t>(samples_per_param)) {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        } else {
            while (idx.size() < static_cast<std::size_t>(samples_per_param)) {
                std::size_t i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n)));
                if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
            }
        }
        for (std::size_t i : idx) {
            double& w = p.ptr()[i];
            const double saved = w;
            const double h = 1e-5 * std::max(1.0, std::abs(saved));
            w = saved + h;
            const double lp = loss_fn().item();
            w = saved - h;
            const double lm = loss_fn().item();
            w = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[name][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            entry.checked += 1;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace mmtk
