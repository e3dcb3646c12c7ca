#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace voldose {

// Dense NCHW tensor. Also used for conv weights as (out_ch, in_ch, kh, kw)
// and deconv weights as (in_ch, out_ch, kh, kw).
template <class T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw std::invalid_argument("tensor dims must be positive");
    }

    std::size_t size() const { return v.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    T& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }
    T at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }

    T* plane_ptr(int in, int ic) { return v.data() + (static_cast<std::size_t>(in) * c + ic) * plane(); }
    const T* plane_ptr(int in, int ic) const {
        return v.data() + (static_cast<std::size_t>(in) * c + ic) * plane();
    }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

using Tensor4f = Tensor4<float>;

template <class T>
void require_shape(const Tensor4<T>& t, int n, int c, int h, int w, const char* what) {
    if (t.n != n || t.c != c || t.h != h || t.w != w)
        throw std::runtime_error(std::string(what) + ": shape " + t.shape_str() +
                                 ", expected (" + std::to_string(n) + "," + std::to_string(c) +
                                 "," + std::to_string(h) + "," + std::to_string(w) + ")");
}

} // namespace voldose
