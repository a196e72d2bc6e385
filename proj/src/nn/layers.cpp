#include "oasis/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace oasis::nn {

Tensor ParamStore::add(const std::string& name, Tensor t, const std::string& group) {
    for (const auto& e : entries_)
        if (e.name == name) throw std::runtime_error("duplicate parameter name: " + name);
    t.set_requires_grad(true);
    entries_.push_back({name, t, group});
    return t;
}

Tensor ParamStore::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::runtime_error("parameter not found: " + name);
}

int64_t ParamStore::total_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
}

int64_t ParamStore::count_with_prefix(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& e : entries_)
        if (e.name.rfind(prefix, 0) == 0) n += e.tensor.numel();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

namespace {
Tensor kaiming(std::vector<int> shape, int fan_in, Rng& rng) {
    const float std = std::sqrt(2.0f / (float)fan_in);
    return randn(std::move(shape), rng, std);
}
}  // namespace

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
               int ksize, int stride_, int pad_, Rng& rng, bool bias,
               const std::string& group)
    : stride(stride_), pad(pad_) {
    weight = ps.add(name + ".weight",
                    kaiming({out_ch, in_ch, ksize, ksize}, in_ch * ksize * ksize, rng),
                    group);
    if (bias) bias_t = ps.add(name + ".bias", Tensor::zeros({out_ch}), group);
}

Tensor Conv2d::forward(const Tensor& x) const {
    return conv2d(x, weight, bias_t, stride, pad);
}

ConvTranspose2d::ConvTranspose2d(ParamStore& ps, const std::string& name, int in_ch,
                                 int out_ch, int ksize, int stride_, Rng& rng,
                                 bool bias, const std::string& group)
    : stride(stride_) {
    weight = ps.add(name + ".weight",
                    kaiming({in_ch, out_ch, ksize, ksize}, in_ch * ksize * ksize, rng),
                    group);
    if (bias) bias_t = ps.add(name + ".bias", Tensor::zeros({out_ch}), group);
}

Tensor ConvTranspose2d::forward(const Tensor& x) const {
    return conv_transpose2d(x, weight, bias_t, stride);
}

Linear::Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim,
               Rng& rng, bool bias, const std::string& group) {
    weight = ps.add(name + ".weight", kaiming({out_dim, in_dim}, in_dim, rng), group);
    if (bias) bias_t = ps.add(name + ".bias", Tensor::zeros({1, out_dim}), group);
}

Tensor Linear::forward(const Tensor& x) const {
    Tensor y = matmul(x, weight, false, true);  // [N,in]*[out,in]^T
    if (bias_t.defined()) y = add(y, bias_t);
    return y;
}

int norm_groups_for(int channels) {
    for (int g : {8, 4, 2})
        if (channels % g == 0) return g;
    return 1;
}

GroupNorm::GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups_,
                     const std::string& group)
    : groups(groups_) {
    if (channels % groups != 0) throw std::runtime_error("GroupNorm: channels % groups != 0");
    gamma = ps.add(name + ".gamma", Tensor::full({channels, 1, 1}, 1.0f), group);
    beta = ps.add(name + ".beta", Tensor::zeros({channels, 1, 1}), group);
}

Tensor GroupNorm::forward(const Tensor& x) const {
    const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
    Tensor flat = reshape(x, {groups, (C / groups) * H * W});
    Tensor mu = mean_axis(flat, 1, true);
    Tensor centered = sub(flat, mu);
    Tensor var = mean_axis(mul(centered, centered), 1, true);
    Tensor inv = div(Tensor::full({1}, 1.0f), sqrt(add_scalar(var, eps)));
    Tensor normed = reshape(mul(centered, inv), {C, H, W});
    return add(mul(normed, gamma), beta);
}

ResidualBlock::ResidualBlock(ParamStore& ps, const std::string& name, int in_ch,
                             int out_ch, int stride, Rng& rng, float slope_,
                             const std::string& group)
    : slope(slope_) {
    conv1 = Conv2d(ps, name + ".conv1", in_ch, out_ch, 3, stride, 1, rng, true, group);
    gn1 = GroupNorm(ps, name + ".gn1", out_ch, norm_groups_for(out_ch), group);
    conv2 = Conv2d(ps, name + ".conv2", out_ch, out_ch, 3, 1, 1, rng, true, group);
    gn2 = GroupNorm(ps, name + ".gn2", out_ch, norm_groups_for(out_ch), group);
    has_proj = (in_ch != out_ch) || (stride != 1);
    if (has_proj)
        proj = Conv2d(ps, name + ".proj", in_ch, out_ch, 1, stride, 0, rng, false, group);
}

Tensor ResidualBlock::forward(const Tensor& x) const {
    Tensor h = leaky_relu(gn1.forward(conv1.forward(x)), slope);
    h = gn2.forward(conv2.forward(h));
    Tensor skip = has_proj ? proj.forward(x) : x;
    return leaky_relu(add(h, skip), slope);
}

}  // namespace oasis::nn
