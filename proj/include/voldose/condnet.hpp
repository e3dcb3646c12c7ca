#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "voldose/conductor.hpp"
#include "voldose/dataset.hpp"
#include "voldose/grid.hpp"
#include "voldose/layers.hpp"
#include "voldose/tensor.hpp"

namespace voldose {

// Multi-encoder / multi-decoder slice-to-slice network.
//
// Layout for U inputs, V outputs, depth I on N=2^p square slices:
//   encoder u, level i=1..I-1: conv(R) -> BN -> ReLU -> maxpool2
//     activation before pooling: 2^(i+1) x [2^(p+1-i)]^2 (skip source)
//     after pooling:             2^(i+1) x [2^(p-i)]^2
//   hub: channel concat of the U deepest pooled features,
//        U*2^I x [2^(p+1-I)]^2
//   decoder v, level i=I-1..1:
//     i<=I-2: concat with the U encoder level-(i+1) pre-pool activations
//     conv(S) -> BN -> ReLU   (channels -> 2^(i+2))
//     deconv 2x2 stride 2 -> BN -> ReLU (channels -> 2^(i+1), size doubles)
//   map v: conv(T) to 1 channel at [2^p]^2, sigmoid.
struct NetConfig {
    int enc_tracks = 2; // U
    int dec_tracks = 1; // V
    int depth = 4;      // I
    int size_exp = 6;   // p; slice side N = 2^p

    // kernel sizes, all odd; [u][i-1] / [v][i-1] for level i
    std::vector<std::vector<int>> enc_kernels; // R, levels 1..I-1
    std::vector<std::vector<int>> cnv_kernels; // S, levels 1..I-1
    std::vector<int> map_kernels;              // T, one per decoder

    static NetConfig make(int u, int v, int i, int p, int r = 3, int s = 5, int t = 5);
    void validate() const;

    int slice_side() const { return 1 << size_exp; }
    int levels() const { return depth - 1; }
    int enc_channels(int level) const { return 1 << (level + 1); }      // 2^(i+1)
    int hub_channels() const { return enc_tracks * (1 << depth); }      // U*2^I
    int hub_side() const { return 1 << (size_exp + 1 - depth); }        // 2^(p+1-I)
    int cnv_channels(int level) const { return 1 << (level + 2); }      // 2^(i+2)
};

struct ConvParam {
    int oc = 0, ic = 0, k = 0;
    Tensor4f w;           // (oc, ic, k, k)
    std::vector<float> b; // oc
    Tensor4f gw;
    std::vector<float> gb;
};

struct DeconvParam {
    int ic = 0, oc = 0;
    Tensor4f w; // (ic, oc, 2, 2)
    std::vector<float> b;
    Tensor4f gw;
    std::vector<float> gb;
};

struct BnParam {
    int c = 0;
    std::vector<float> gamma, beta, run_mean, run_var;
    std::vector<float> g_gamma, g_beta;
};

struct EncLevel {
    ConvParam conv;
    BnParam bn;
};

struct DecLevel {
    ConvParam cnv;
    BnParam cnv_bn;
    DeconvParam up;
    BnParam up_bn;
};

struct DecoderTrack {
    std::vector<DecLevel> levels; // [i-1] for level i = 1..I-1
    ConvParam map;
};

// named view of one parameter (or running-stat) tensor
struct ParamRef {
    std::string name;
    std::vector<int> shape;
    float* values = nullptr;
    float* grads = nullptr; // null for running stats
    std::size_t count = 0;
    bool trainable = true;
};

struct Network {
    NetConfig cfg;
    std::vector<std::vector<EncLevel>> encoders; // [u][level-1]
    std::vector<DecoderTrack> decoders;          // [v]

    std::vector<ParamRef> params(); // stable registry order
    void zero_grads();

    // expected activation shapes (name -> {channels, side}), used by the
    // shape assertions at build and forward time
    std::map<std::string, std::pair<int, int>> shape_ledger() const;
};

// Allocates all layers per the config shape ledger; weights drawn from a
// fan-in-scaled uniform with the seeded generator, BN stats zero/one.
Network build_network(const NetConfig& cfg, std::uint64_t seed);

inline constexpr float kBnEps = 1e-5f;
inline constexpr float kBnMomentum = 0.9f;

// Inference forward over a batch of input slices (one tensor per encoder
// track, each (N,1,S,S) in [0,1]); returns V output tensors in (0,1).
std::vector<Tensor4f> forward_infer(const Network& net, const std::vector<Tensor4f>& inputs);

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
    double step = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<float>> m, v; // per trainable param
    std::int64_t t = 0;
};

AdamState make_adam_state(const std::vector<ParamRef>& params);

// one update with bias correction; t advances by one. Throws on non-finite
// gradients.
void adam_step(std::vector<ParamRef>& params, AdamState& state, const AdamConfig& hyper);

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
    int epochs = 50;
    int batch = 4;
    double validation_fraction = 0.1;
    AdamConfig adam;
    std::uint64_t seed = 1;
    bool verbose = false;
};

struct TrainStats {
    double initial_loss = 0.0; // training-set BCE before the first update
    std::vector<double> train_loss; // per-epoch mean over optimization batches
    std::vector<double> val_loss;   // per-epoch, inference mode
    int train_slices = 0;
    int val_slices = 0;
};

// Slices every volume along axis, shuffles with the seed, splits
// round(total/10) into validation, and optimizes the BCE with Adam.
Network train(const NetConfig& cfg, const TrainConfig& tcfg, const TrainingSet& data,
              Axis axis, TrainStats* stats = nullptr);

// ---------------------------------------------------------------------------
// volume inference

struct DirectionNets {
    Network axial;
    Network sagittal;
    Network coronal;
};

// Slice-by-slice network application along one axis; inputs are normalized
// volumes, output the per-direction normalized conductor (per v).
std::vector<ScalarGrid> infer_direction(const Network& net,
                                        const std::vector<ScalarGrid>& inputs, Axis axis);

// Full chain: per-direction inference, direction averaging, and
// denormalization with each table's scale. Returns one conductor per v.
// Inputs must already be normalized (values in [0,1]).
std::vector<ScalarGrid> infer_volume(const DirectionNets& nets,
                                     const std::vector<ScalarGrid>& raw_inputs,
                                     const std::vector<TissueTable>& tables, double tau);

// ---------------------------------------------------------------------------
// weight file, magic CNW1: text manifest then little-endian f32 payloads

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

} // namespace voldose
