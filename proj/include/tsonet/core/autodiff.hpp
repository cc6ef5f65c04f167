#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tsonet/core/error.hpp"
#include "tsonet/core/tensor.hpp"

namespace tsonet::ag {

template <class T>
class node;

// Graph handle. Ops take and return var<T>; parameters are long-lived vars
// shared across per-sample graphs.
template <class T>
using var = std::shared_ptr<node<T>>;

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

// RAII scope that disables graph construction (evaluation passes).
struct no_grad_guard {
    bool prev;
    no_grad_guard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
    ~no_grad_guard() { grad_mode_flag() = prev; }
};

template <class T>
class node {
public:
    tensor<T> value;
    tensor<T> grad;
    bool requires_grad = false;
    std::string name; // parameters only
    std::vector<var<T>> parents;
    std::function<void(node<T>&)> backprop;

    void ensure_grad() {
        if (grad.numel() != value.numel()) grad = tensor<T>(value.shape());
    }

    void accumulate(const tensor<T>& g) {
        ensure_grad();
        T* dst = grad.data();
        const T* src = g.data();
        const int64_t n = grad.numel();
        for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }

    void zero_grad() {
        if (grad.numel() > 0) grad.fill(T(0));
    }
};

template <class T>
var<T> constant(tensor<T> v) {
    auto n = std::make_shared<node<T>>();
    n->value = std::move(v);
    return n;
}

template <class T>
var<T> leaf(tensor<T> v, bool requires_grad = true) {
    auto n = std::make_shared<node<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return n;
}

// Create an op node. Graph edges are dropped when no parent needs gradients
// or when grads are globally disabled, so eval passes build no tape.
template <class T>
var<T> apply(tensor<T> out, std::vector<var<T>> parents,
             std::function<void(node<T>&)> backprop) {
    auto n = std::make_shared<node<T>>();
    n->value = std::move(out);
    bool needs = false;
    if (grad_mode_flag()) {
        for (const auto& p : parents)
            if (p && p->requires_grad) { needs = true; break; }
    }
    if (needs) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

// Reverse sweep from a scalar root. seed is the upstream gradient (1/batch_n
// when averaging per-sample losses). Parameter grads accumulate across calls.
template <class T>
void backward(const var<T>& root, T seed = T(1)) {
    check_contract(root != nullptr && root->value.numel() == 1,
                   "backward: root must be a scalar node");
    if (!root->requires_grad) return;

    // Iterative post-order topological sort over grad-requiring nodes.
    std::vector<node<T>*> order;
    std::unordered_set<node<T>*> visited;
    std::vector<std::pair<node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            node<T>* p = n->parents[idx++].get();
            if (p && p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        node<T>* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

// Named parameter registry. Registration order is the construction order and
// fixes both the init RNG stream and the checkpoint layout.
template <class T>
struct param_store {
    std::vector<var<T>> list;
    std::unordered_map<std::string, size_t> index;

    var<T> add(const std::string& name, tensor<T> init) {
        check_contract(!index.count(name), "param_store: duplicate parameter " + name);
        auto p = leaf<T>(std::move(init), true);
        p->name = name;
        index[name] = list.size();
        list.push_back(p);
        return p;
    }

    var<T> get(const std::string& name) const {
        auto it = index.find(name);
        check_contract(it != index.end(), "param_store: unknown parameter " + name);
        return list[it->second];
    }

    bool has(const std::string& name) const { return index.count(name) > 0; }

    void zero_grad() {
        for (auto& p : list) p->zero_grad();
    }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& p : list) n += p->value.numel();
        return n;
    }
};

} // namespace tsonet::ag
