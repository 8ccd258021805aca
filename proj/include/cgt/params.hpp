#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cgt/errors.hpp"
#include "cgt/tensor.hpp"

namespace cgt {

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
};

// Owns a model's parameters in registration order. Registration order is the
// checkpoint manifest order, so it must stay deterministic.
template <typename T>
class ParameterStore {
public:
    Parameter<T>& create(std::string name, Tensor<T> init, bool trainable = true) {
        if (index_.count(name)) throw DataError("duplicate parameter name: " + name);
        auto p = std::make_unique<Parameter<T>>();
        p->name = std::move(name);
        p->tensor = std::move(init);
        p->trainable = trainable;
        index_[p->name] = items_.size();
        items_.push_back(std::move(p));
        return *items_.back();
    }

    Parameter<T>* find(const std::string& name) {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : items_[it->second].get();
    }
    const Parameter<T>* find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : items_[it->second].get();
    }

    std::size_t size() const { return items_.size(); }
    Parameter<T>& at(std::size_t i) { return *items_[i]; }
    const Parameter<T>& at(std::size_t i) const { return *items_[i]; }

    std::size_t total_scalars() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p->tensor.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : items_) {
            p->tensor.ensure_grad();
            p->tensor.zero_grad();
        }
    }

private:
    std::vector<std::unique_ptr<Parameter<T>>> items_;
    std::map<std::string, std::size_t> index_;
};

} // namespace cgt
