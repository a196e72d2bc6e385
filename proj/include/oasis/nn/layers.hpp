#pragma once

#include <string>
#include <vector>

#include "oasis/tensor/ops.hpp"
#include "oasis/tensor/tensor.hpp"

namespace oasis::nn {

// Ordered registry of learnable tensors. Names are stable across runs and
// drive checkpoint layout; tags route optimizer parameter groups.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor t, const std::string& group = "head");

    struct Entry {
        std::string name;
        Tensor tensor;
        std::string group;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }
    Tensor find(const std::string& name) const;
    int64_t total_count() const;
    int64_t count_with_prefix(const std::string& prefix) const;
    void zero_grads();

private:
    std::vector<Entry> entries_;
};

struct Conv2d {
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int ksize,
           int stride, int pad, Rng& rng, bool bias = true,
           const std::string& group = "head");
    Tensor forward(const Tensor& x) const;

    Tensor weight, bias_t;
    int stride = 1, pad = 0;
};

struct ConvTranspose2d {
    ConvTranspose2d() = default;
    ConvTranspose2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                    int ksize, int stride, Rng& rng, bool bias = true,
                    const std::string& group = "head");
    Tensor forward(const Tensor& x) const;

    Tensor weight, bias_t;
    int stride = 2;
};

struct Linear {
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
           bool bias = true, const std::string& group = "head");
    // x [N, in] -> [N, out]
    Tensor forward(const Tensor& x) const;

    Tensor weight;  // [out, in]
    Tensor bias_t;  // [out] as [1, out]
};

struct GroupNorm {
    GroupNorm() = default;
    GroupNorm(ParamStore& ps, const std::string& name, int channels, int groups,
              const std::string& group = "head");
    Tensor forward(const Tensor& x) const;  // x [C,H,W]

    Tensor gamma, beta;  // [C,1,1]
    int groups = 1;
    float eps = 1e-5f;
};

// conv(3x3) -> GN -> lrelu -> conv(3x3) -> GN, plus projection skip when
// shape changes; lrelu on the sum.
struct ResidualBlock {
    ResidualBlock() = default;
    ResidualBlock(ParamStore& ps, const std::string& name, int in_ch, int out_ch,
                  int stride, Rng& rng, float slope, const std::string& group = "head");
    Tensor forward(const Tensor& x) const;

    Conv2d conv1, conv2, proj;
    GroupNorm gn1, gn2;
    bool has_proj = false;
    float slope = 0.01f;
};

int norm_groups_for(int channels);

}  // namespace oasis::nn
