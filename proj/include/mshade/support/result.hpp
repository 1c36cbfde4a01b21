#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace mshade {

// Minimal expected-style result; enough for the toolkit's error plumbing.
template <typename T, typename E>
class Result {
public:
    Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
    Result(E error) : v_(std::in_place_index<1>, std::move(error)) {}

    bool ok() const { return v_.index() == 0; }
    explicit operator bool() const { return ok(); }

    T &value() {
        assert(ok());
        return std::get<0>(v_);
    }
    const T &value() const {
        assert(ok());
        return std::get<0>(v_);
    }
    E &error() {
        assert(!ok());
        return std::get<1>(v_);
    }
    const E &error() const {
        assert(!ok());
        return std::get<1>(v_);
    }

    T take() { return std::move(std::get<0>(v_)); }

private:
    std::variant<T, E> v_;
};

} // namespace mshade
