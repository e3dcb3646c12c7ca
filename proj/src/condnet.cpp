#include "voldose/condnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "voldose/conductor.hpp"
#include "voldose/rng.hpp"

namespace voldose {

// ---------------------------------------------------------------------------
// config

NetConfig NetConfig::make(int u, int v, int i, int p, int r, int s, int t) {
    NetConfig cfg;
    cfg.enc_tracks = u;
    cfg.dec_tracks = v;
    cfg.depth = i;
    cfg.size_exp = p;
    cfg.enc_kernels.assign(static_cast<std::size_t>(u), std::vector<int>(static_cast<std::size_t>(i - 1), r));
    cfg.cnv_kernels.assign(static_cast<std::size_t>(v), std::vector<int>(static_cast<std::size_t>(i - 1), s));
    cfg.map_kernels.assign(static_cast<std::size_t>(v), t);
    cfg.validate();
    return cfg;
}

void NetConfig::validate() const {
    if (enc_tracks < 1 || dec_tracks < 1)
        throw std::invalid_argument("net config: need at least one encoder and decoder track");
    if (depth < 2) throw std::invalid_argument("net config: depth must be >= 2");
    if (size_exp - depth < 1)
        throw std::invalid_argument("net config: need size_exp - depth >= 1 so the hub "
                                    "spatial size 2^(p+1-I) stays >= 2");
    auto check_odd = [](int k) {
        if (k < 1 || k % 2 == 0)
            throw std::invalid_argument("net config: kernels must be odd positive");
    };
    if (static_cast<int>(enc_kernels.size()) != enc_tracks ||
        static_cast<int>(cnv_kernels.size()) != dec_tracks ||
        static_cast<int>(map_kernels.size()) != dec_tracks)
        throw std::invalid_argument("net config: kernel lists do not match track counts");
    for (const auto& ks : enc_kernels) {
        if (static_cast<int>(ks.size()) != depth - 1)
            throw std::invalid_argument("net config: encoder kernel list length != depth-1");
        for (int k : ks) check_odd(k);
    }
    for (const auto& ks : cnv_kernels) {
        if (static_cast<int>(ks.size()) != depth - 1)
            throw std::invalid_argument("net config: decoder kernel list length != depth-1");
        for (int k : ks) check_odd(k);
    }
    for (int k : map_kernels) check_odd(k);
}

// ---------------------------------------------------------------------------
// construction

namespace {

ConvParam make_conv(int oc, int ic, int k) {
    ConvParam c;
    c.oc = oc;
    c.ic = ic;
    c.k = k;
    c.w = Tensor4f(oc, ic, k, k);
    c.b.assign(static_cast<std::size_t>(oc), 0.0f);
    c.gw = Tensor4f(oc, ic, k, k);
    c.gb.assign(static_cast<std::size_t>(oc), 0.0f);
    return c;
}

DeconvParam make_deconv(int ic, int oc) {
    DeconvParam d;
    d.ic = ic;
    d.oc = oc;
    d.w = Tensor4f(ic, oc, 2, 2);
    d.b.assign(static_cast<std::size_t>(oc), 0.0f);
    d.gw = Tensor4f(ic, oc, 2, 2);
    d.gb.assign(static_cast<std::size_t>(oc), 0.0f);
    return d;
}

BnParam make_bn(int c) {
    BnParam b;
    b.c = c;
    b.gamma.assign(static_cast<std::size_t>(c), 1.0f);
    b.beta.assign(static_cast<std::size_t>(c), 0.0f);
    b.run_mean.assign(static_cast<std::size_t>(c), 0.0f);
    b.run_var.assign(static_cast<std::size_t>(c), 1.0f);
    b.g_gamma.assign(static_cast<std::size_t>(c), 0.0f);
    b.g_beta.assign(static_cast<std::size_t>(c), 0.0f);
    return b;
}

void fill_uniform(Tensor4f& w, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : w.v) v = static_cast<float>(rng.uniform(-bound, bound));
}

int enc_in_channels(const NetConfig& cfg, int li) {
    return li == 0 ? 1 : cfg.enc_channels(li); // level i=li+1 sees 2^i channels
}

int cnv_in_channels(const NetConfig& cfg, int li) {
    if (li == cfg.levels() - 1) return cfg.hub_channels();
    return (cfg.enc_tracks + 1) * cfg.cnv_channels(li + 1);
}

} // namespace

Network build_network(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Network net;
    net.cfg = cfg;
    const int L = cfg.levels();

    net.encoders.resize(static_cast<std::size_t>(cfg.enc_tracks));
    for (int u = 0; u < cfg.enc_tracks; ++u) {
        auto& track = net.encoders[static_cast<std::size_t>(u)];
        track.reserve(static_cast<std::size_t>(L));
        for (int li = 0; li < L; ++li) {
            EncLevel lvl;
            const int oc = cfg.enc_channels(li + 1);
            lvl.conv = make_conv(oc, enc_in_channels(cfg, li),
                                 cfg.enc_kernels[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)]);
            lvl.bn = make_bn(oc);
            track.push_back(std::move(lvl));
        }
    }

    net.decoders.resize(static_cast<std::size_t>(cfg.dec_tracks));
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        auto& track = net.decoders[static_cast<std::size_t>(v)];
        track.levels.reserve(static_cast<std::size_t>(L));
        for (int li = 0; li < L; ++li) {
            DecLevel lvl;
            const int oc = cfg.cnv_channels(li + 1);
            lvl.cnv = make_conv(oc, cnv_in_channels(cfg, li),
                                cfg.cnv_kernels[static_cast<std::size_t>(v)][static_cast<std::size_t>(li)]);
            lvl.cnv_bn = make_bn(oc);
            lvl.up = make_deconv(oc, cfg.enc_channels(li + 1));
            lvl.up_bn = make_bn(cfg.enc_channels(li + 1));
            track.levels.push_back(std::move(lvl));
        }
        track.map = make_conv(1, cfg.enc_channels(1), cfg.map_kernels[static_cast<std::size_t>(v)]);
    }

    // one seeded stream, drawn in registry order: encoders, then decoders.
    // fan-in is the full kernel tap count for conv and one tap per output
    // pixel for the 2x2 stride-2 deconv
    Rng rng(seed);
    for (auto& track : net.encoders)
        for (auto& lvl : track)
            fill_uniform(lvl.conv.w, lvl.conv.ic * lvl.conv.k * lvl.conv.k, rng);
    for (auto& track : net.decoders) {
        for (auto& lvl : track.levels) {
            fill_uniform(lvl.cnv.w, lvl.cnv.ic * lvl.cnv.k * lvl.cnv.k, rng);
            fill_uniform(lvl.up.w, lvl.up.ic, rng);
        }
        fill_uniform(track.map.w, track.map.ic * track.map.k * track.map.k, rng);
    }
    return net;
}

std::vector<ParamRef> Network::params() {
    std::vector<ParamRef> out;
    auto add = [&out](const std::string& name, std::vector<int> shape, std::vector<float>& w,
                      std::vector<float>* g, bool trainable) {
        std::size_t count = 1;
        for (int d : shape) count *= static_cast<std::size_t>(d);
        if (count != w.size()) throw std::logic_error("param registry shape mismatch: " + name);
        out.push_back({name, std::move(shape), w.data(), g ? g->data() : nullptr, count, trainable});
    };
    auto add_bn = [&add](const std::string& prefix, BnParam& bn) {
        add(prefix + ".gamma", {bn.c}, bn.gamma, &bn.g_gamma, true);
        add(prefix + ".beta", {bn.c}, bn.beta, &bn.g_beta, true);
        add(prefix + ".run_mean", {bn.c}, bn.run_mean, nullptr, false);
        add(prefix + ".run_var", {bn.c}, bn.run_var, nullptr, false);
    };
    auto add_conv = [&out](const std::string& prefix, ConvParam& c) {
        out.push_back({prefix + ".w", {c.oc, c.ic, c.k, c.k}, c.w.v.data(), c.gw.v.data(),
                       c.w.size(), true});
        out.push_back({prefix + ".b", {c.oc}, c.b.data(), c.gb.data(), c.b.size(), true});
    };
    auto add_deconv = [&out](const std::string& prefix, DeconvParam& d) {
        out.push_back({prefix + ".w", {d.ic, d.oc, 2, 2}, d.w.v.data(), d.gw.v.data(),
                       d.w.size(), true});
        out.push_back({prefix + ".b", {d.oc}, d.b.data(), d.gb.data(), d.b.size(), true});
    };

    for (int u = 0; u < cfg.enc_tracks; ++u)
        for (int li = 0; li < cfg.levels(); ++li) {
            auto& lvl = encoders[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)];
            const std::string prefix = "enc" + std::to_string(u) + ".l" + std::to_string(li + 1);
            add_conv(prefix + ".conv", lvl.conv);
            add_bn(prefix + ".bn", lvl.bn);
        }
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        auto& track = decoders[static_cast<std::size_t>(v)];
        for (int li = 0; li < cfg.levels(); ++li) {
            auto& lvl = track.levels[static_cast<std::size_t>(li)];
            const std::string prefix = "dec" + std::to_string(v) + ".l" + std::to_string(li + 1);
            add_conv(prefix + ".cnv", lvl.cnv);
            add_bn(prefix + ".cnv_bn", lvl.cnv_bn);
            add_deconv(prefix + ".up", lvl.up);
            add_bn(prefix + ".up_bn", lvl.up_bn);
        }
        add_conv("dec" + std::to_string(v) + ".map", track.map);
    }
    return out;
}

void Network::zero_grads() {
    for (auto& p : params()) {
        if (!p.grads) continue;
        std::fill_n(p.grads, p.count, 0.0f);
    }
}

std::map<std::string, std::pair<int, int>> Network::shape_ledger() const {
    std::map<std::string, std::pair<int, int>> ledger;
    const int side = cfg.slice_side();
    for (int u = 0; u < cfg.enc_tracks; ++u)
        for (int i = 1; i <= cfg.levels(); ++i) {
            const std::string prefix = "enc" + std::to_string(u) + ".l" + std::to_string(i);
            ledger[prefix + ".act"] = {cfg.enc_channels(i), side >> (i - 1)};
            ledger[prefix + ".pooled"] = {cfg.enc_channels(i), side >> i};
        }
    ledger["hub"] = {cfg.hub_channels(), cfg.hub_side()};
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        for (int i = 1; i <= cfg.levels(); ++i) {
            const std::string prefix = "dec" + std::to_string(v) + ".l" + std::to_string(i);
            ledger[prefix + ".cnv"] = {cfg.cnv_channels(i), side >> i};
            ledger[prefix + ".up"] = {cfg.enc_channels(i), side >> (i - 1)};
        }
        ledger["out" + std::to_string(v)] = {1, side};
    }
    return ledger;
}

// ---------------------------------------------------------------------------
// forward / backward

namespace {

struct EncTrace {
    Tensor4f conv_in;
    BnCache<float> bn;
    Tensor4f act; // pre-pool, skip source
    Tensor4f pooled;
    std::vector<std::int64_t> argmax;
};

struct DecTrace {
    Tensor4f cnv_in;
    std::vector<int> concat_parts; // empty when the input is not a concat
    BnCache<float> cnv_bn;
    Tensor4f cnv_act;
    BnCache<float> up_bn;
    Tensor4f up_act;
};

struct Trace {
    std::vector<std::vector<EncTrace>> enc;
    Tensor4f hub;
    std::vector<std::vector<DecTrace>> dec; // [v][li]
    std::vector<Tensor4f> logits;
    std::vector<Tensor4f> probs;
};

void check_ledger(const Tensor4f& t, int channels, int side, const char* what) {
    if (t.c != channels || t.h != side || t.w != side)
        throw std::runtime_error(std::string("shape ledger violated at ") + what + ": got " +
                                 t.shape_str() + ", expected c=" + std::to_string(channels) +
                                 " side=" + std::to_string(side));
}

void check_inputs(const Network& net, const std::vector<Tensor4f>& inputs) {
    const auto& cfg = net.cfg;
    if (static_cast<int>(inputs.size()) != cfg.enc_tracks)
        throw std::invalid_argument("forward: expected " + std::to_string(cfg.enc_tracks) +
                                    " input slices");
    const int side = cfg.slice_side();
    for (const auto& x : inputs) {
        if (x.c != 1 || x.h != side || x.w != side || x.n != inputs[0].n)
            throw std::invalid_argument("forward: input slice shape " + x.shape_str() +
                                        " does not match N=" + std::to_string(side));
        for (float v : x.v)
            if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    }
}

// training=true caches everything needed by the backward pass and updates
// the BN running statistics
std::vector<Tensor4f> forward_impl(Network& net, const std::vector<Tensor4f>& inputs,
                                   bool training, Trace* trace) {
    check_inputs(net, inputs);
    const auto& cfg = net.cfg;
    const int L = cfg.levels();

    if (trace) {
        trace->enc.assign(static_cast<std::size_t>(cfg.enc_tracks), {});
        trace->dec.assign(static_cast<std::size_t>(cfg.dec_tracks), {});
        trace->logits.clear();
        trace->probs.clear();
    }

    std::vector<std::vector<Tensor4f>> acts(static_cast<std::size_t>(cfg.enc_tracks));
    std::vector<Tensor4f> deepest(static_cast<std::size_t>(cfg.enc_tracks));

    for (int u = 0; u < cfg.enc_tracks; ++u) {
        Tensor4f x = inputs[static_cast<std::size_t>(u)];
        auto& track = net.encoders[static_cast<std::size_t>(u)];
        if (trace) trace->enc[static_cast<std::size_t>(u)].resize(static_cast<std::size_t>(L));
        acts[static_cast<std::size_t>(u)].resize(static_cast<std::size_t>(L));
        for (int li = 0; li < L; ++li) {
            auto& lvl = track[static_cast<std::size_t>(li)];
            EncTrace* et = trace ? &trace->enc[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)] : nullptr;
            if (et) et->conv_in = x;
            Tensor4f t = conv2d_same(x, lvl.conv.w, lvl.conv.b);
            BnCache<float> cache;
            t = training ? batchnorm_train(t, lvl.bn.gamma, lvl.bn.beta, lvl.bn.run_mean,
                                           lvl.bn.run_var, kBnEps, kBnMomentum, cache)
                         : batchnorm_infer(t, lvl.bn.gamma, lvl.bn.beta, lvl.bn.run_mean,
                                           lvl.bn.run_var, kBnEps);
            Tensor4f act = relu(t);
            check_ledger(act, cfg.enc_channels(li + 1), cfg.slice_side() >> li, "encoder act");
            std::vector<std::int64_t> argmax;
            Tensor4f pooled = maxpool2(act, et ? &argmax : nullptr);
            check_ledger(pooled, cfg.enc_channels(li + 1), cfg.slice_side() >> (li + 1),
                         "encoder pooled");
            if (et) {
                et->bn = std::move(cache);
                et->act = act;
                et->argmax = std::move(argmax);
                et->pooled = pooled;
            }
            acts[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)] = std::move(act);
            if (li == L - 1) deepest[static_cast<std::size_t>(u)] = pooled;
            x = std::move(pooled);
        }
    }

    std::vector<const Tensor4f*> hub_parts;
    for (auto& d : deepest) hub_parts.push_back(&d);
    Tensor4f hub = concat_channels(hub_parts);
    check_ledger(hub, cfg.hub_channels(), cfg.hub_side(), "hub");
    if (trace) trace->hub = hub;

    std::vector<Tensor4f> outputs;
    outputs.reserve(static_cast<std::size_t>(cfg.dec_tracks));
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        auto& track = net.decoders[static_cast<std::size_t>(v)];
        if (trace) trace->dec[static_cast<std::size_t>(v)].resize(static_cast<std::size_t>(L));
        Tensor4f x = hub;
        for (int li = L - 1; li >= 0; --li) {
            auto& lvl = track.levels[static_cast<std::size_t>(li)];
            DecTrace* dt = trace ? &trace->dec[static_cast<std::size_t>(v)][static_cast<std::size_t>(li)] : nullptr;
            std::vector<int> parts;
            if (li <= L - 2) {
                std::vector<const Tensor4f*> cat{&x};
                parts.push_back(x.c);
                for (int u = 0; u < cfg.enc_tracks; ++u) {
                    const Tensor4f& skip = acts[static_cast<std::size_t>(u)][static_cast<std::size_t>(li + 1)];
                    cat.push_back(&skip);
                    parts.push_back(skip.c);
                }
                x = concat_channels(cat);
            }
            if (dt) {
                dt->cnv_in = x;
                dt->concat_parts = parts;
            }
            Tensor4f t = conv2d_same(x, lvl.cnv.w, lvl.cnv.b);
            BnCache<float> cache1;
            t = training ? batchnorm_train(t, lvl.cnv_bn.gamma, lvl.cnv_bn.beta,
                                           lvl.cnv_bn.run_mean, lvl.cnv_bn.run_var, kBnEps,
                                           kBnMomentum, cache1)
                         : batchnorm_infer(t, lvl.cnv_bn.gamma, lvl.cnv_bn.beta,
                                           lvl.cnv_bn.run_mean, lvl.cnv_bn.run_var, kBnEps);
            Tensor4f cnv_act = relu(t);
            check_ledger(cnv_act, cfg.cnv_channels(li + 1), cfg.slice_side() >> (li + 1),
                         "decoder cnv");
            Tensor4f up = deconv2_stride2(cnv_act, lvl.up.w, lvl.up.b);
            BnCache<float> cache2;
            up = training ? batchnorm_train(up, lvl.up_bn.gamma, lvl.up_bn.beta,
                                            lvl.up_bn.run_mean, lvl.up_bn.run_var, kBnEps,
                                            kBnMomentum, cache2)
                          : batchnorm_infer(up, lvl.up_bn.gamma, lvl.up_bn.beta,
                                            lvl.up_bn.run_mean, lvl.up_bn.run_var, kBnEps);
            Tensor4f up_act = relu(up);
            check_ledger(up_act, cfg.enc_channels(li + 1), cfg.slice_side() >> li, "decoder up");
            if (dt) {
                dt->cnv_bn = std::move(cache1);
                dt->cnv_act = cnv_act;
                dt->up_bn = std::move(cache2);
                dt->up_act = up_act;
            }
            x = std::move(up_act);
        }
        Tensor4f logits = conv2d_same(x, track.map.w, track.map.b);
        check_ledger(logits, 1, cfg.slice_side(), "map output");
        Tensor4f probs = sigmoid(logits);
        if (trace) {
            trace->logits.push_back(logits);
            trace->probs.push_back(probs);
        }
        outputs.push_back(std::move(probs));
    }
    return outputs;
}

void add_into(Tensor4f& dst, const Tensor4f& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.v[i] += src.v[i];
}

void add_into(std::vector<float>& dst, const std::vector<float>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// accumulates parameter gradients; dlogits is one tensor per decoder track
void backward_impl(Network& net, const Trace& trace, const std::vector<Tensor4f>& dlogits) {
    const auto& cfg = net.cfg;
    const int L = cfg.levels();

    // gradient sinks for encoder activations (skip + pool paths) and the hub
    std::vector<std::vector<Tensor4f>> d_act(static_cast<std::size_t>(cfg.enc_tracks));
    for (int u = 0; u < cfg.enc_tracks; ++u) {
        d_act[static_cast<std::size_t>(u)].resize(static_cast<std::size_t>(L));
        for (int li = 0; li < L; ++li) {
            const auto& a = trace.enc[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)].act;
            d_act[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)] =
                Tensor4f(a.n, a.c, a.h, a.w);
        }
    }
    Tensor4f d_hub(trace.hub.n, trace.hub.c, trace.hub.h, trace.hub.w);

    for (int v = 0; v < cfg.dec_tracks; ++v) {
        auto& track = net.decoders[static_cast<std::size_t>(v)];
        const auto& dtr = trace.dec[static_cast<std::size_t>(v)];

        // map
        Tensor4f dx, dw;
        std::vector<float> db;
        conv2d_same_backward(dtr[0].up_act, track.map.w, dlogits[static_cast<std::size_t>(v)],
                             dx, dw, db);
        add_into(track.map.gw, dw);
        add_into(track.map.gb, db);

        for (int li = 0; li <= L - 1; ++li) {
            auto& lvl = track.levels[static_cast<std::size_t>(li)];
            const auto& dt = dtr[static_cast<std::size_t>(li)];

            // deconv block: relu -> bn -> deconv
            Tensor4f d_up = relu_backward(dt.up_act, dx);
            d_up = batchnorm_backward(d_up, dt.up_bn, lvl.up_bn.gamma, lvl.up_bn.g_gamma,
                                      lvl.up_bn.g_beta);
            // reuse g_gamma/g_beta accumulation via temporaries
            Tensor4f d_cnv_act, dwd;
            std::vector<float> dbd;
            deconv2_stride2_backward(dt.cnv_act, lvl.up.w, d_up, d_cnv_act, dwd, dbd);
            add_into(lvl.up.gw, dwd);
            add_into(lvl.up.gb, dbd);

            // conv block: relu -> bn -> conv
            Tensor4f d_cnv = relu_backward(dt.cnv_act, d_cnv_act);
            d_cnv = batchnorm_backward(d_cnv, dt.cnv_bn, lvl.cnv_bn.gamma, lvl.cnv_bn.g_gamma,
                                       lvl.cnv_bn.g_beta);
            Tensor4f d_in, dwc;
            std::vector<float> dbc;
            conv2d_same_backward(dt.cnv_in, lvl.cnv.w, d_cnv, d_in, dwc, dbc);
            add_into(lvl.cnv.gw, dwc);
            add_into(lvl.cnv.gb, dbc);

            if (li <= L - 2) {
                auto parts = concat_channels_backward(d_in, dt.concat_parts);
                dx = std::move(parts[0]);
                for (int u = 0; u < cfg.enc_tracks; ++u)
                    add_into(d_act[static_cast<std::size_t>(u)][static_cast<std::size_t>(li + 1)],
                             parts[static_cast<std::size_t>(u) + 1]);
            } else {
                add_into(d_hub, d_in);
            }
        }
    }

    // hub split back to the deepest pooled features
    std::vector<int> hub_parts(static_cast<std::size_t>(cfg.enc_tracks), 1 << cfg.depth);
    auto d_deepest = concat_channels_backward(d_hub, hub_parts);

    for (int u = 0; u < cfg.enc_tracks; ++u) {
        auto& track = net.encoders[static_cast<std::size_t>(u)];
        Tensor4f d_pooled = std::move(d_deepest[static_cast<std::size_t>(u)]);
        for (int li = L - 1; li >= 0; --li) {
            auto& lvl = track[static_cast<std::size_t>(li)];
            const auto& et = trace.enc[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)];

            Tensor4f d_a = maxpool2_backward(d_pooled, et.argmax, et.act.h, et.act.w);
            add_into(d_a, d_act[static_cast<std::size_t>(u)][static_cast<std::size_t>(li)]);
            Tensor4f d_bn = relu_backward(et.act, d_a);
            d_bn = batchnorm_backward(d_bn, et.bn, lvl.bn.gamma, lvl.bn.g_gamma, lvl.bn.g_beta);
            Tensor4f d_in, dw;
            std::vector<float> db;
            conv2d_same_backward(et.conv_in, lvl.conv.w, d_bn, d_in, dw, db);
            add_into(lvl.conv.gw, dw);
            add_into(lvl.conv.gb, db);
            d_pooled = std::move(d_in); // gradient w.r.t. previous level's pooled output
        }
    }
}

} // namespace

std::vector<Tensor4f> forward_infer(const Network& net, const std::vector<Tensor4f>& inputs) {
    // inference never mutates the network; the const_cast only feeds the
    // shared impl, which touches running stats in training mode alone
    return forward_impl(const_cast<Network&>(net), inputs, false, nullptr);
}

// ---------------------------------------------------------------------------
// Adam

AdamState make_adam_state(const std::vector<ParamRef>& params) {
    AdamState s;
    for (const auto& p : params) {
        if (!p.trainable) continue;
        s.m.emplace_back(p.count, 0.0f);
        s.v.emplace_back(p.count, 0.0f);
    }
    return s;
}

void adam_step(std::vector<ParamRef>& params, AdamState& state, const AdamConfig& hyper) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
    std::size_t slot = 0;
    for (auto& p : params) {
        if (!p.trainable) continue;
        auto& m = state.m[slot];
        auto& v = state.v[slot];
        ++slot;
        for (std::size_t i = 0; i < p.count; ++i) {
            const double g = static_cast<double>(p.grads[i]);
            if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient in " + p.name);
            const double mi = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
            const double vi = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
            m[i] = static_cast<float>(mi);
            v[i] = static_cast<float>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.values[i] -= static_cast<float>(hyper.step * mhat / (std::sqrt(vhat) + hyper.eps));
        }
    }
}

// ---------------------------------------------------------------------------
// training

namespace {

struct SliceIndex {
    int sample = 0;
    int k = 0;
};

Tensor4f gather_slices(const std::vector<const ScalarGrid*>& vols,
                       const std::vector<SliceIndex>& order, std::size_t begin, std::size_t end,
                       Axis axis) {
    const int n = static_cast<int>(end - begin);
    const auto s0 = slice_extract(*vols[static_cast<std::size_t>(order[begin].sample)], axis,
                                  order[begin].k);
    Tensor4f t(n, 1, s0.q, s0.p);
    for (int b = 0; b < n; ++b) {
        const auto& si = order[begin + static_cast<std::size_t>(b)];
        const auto s = slice_extract(*vols[static_cast<std::size_t>(si.sample)], axis, si.k);
        std::copy(s.data.begin(), s.data.end(), t.plane_ptr(b, 0));
    }
    return t;
}

double batch_loss(const std::vector<Tensor4f>& probs, const std::vector<Tensor4f>& targets) {
    double loss = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) loss += bce_loss(probs[v], targets[v]);
    return loss / static_cast<double>(probs.size());
}

} // namespace

Network train(const NetConfig& cfg, const TrainConfig& tcfg, const TrainingSet& data, Axis axis,
              TrainStats* stats) {
    cfg.validate();
    if (tcfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (tcfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (!(tcfg.validation_fraction > 0.0 && tcfg.validation_fraction < 1.0))
        throw std::invalid_argument("train: validation fraction must be in (0,1)");
    if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");

    const int side = cfg.slice_side();
    for (const auto& s : data.samples) {
        if (static_cast<int>(s.inputs.size()) != cfg.enc_tracks)
            throw std::invalid_argument("train: sample input count != encoder tracks");
        if (static_cast<int>(s.targets.size()) != cfg.dec_tracks)
            throw std::invalid_argument("train: sample target count != decoder tracks");
        for (const auto& g : s.inputs)
            if (g.dims != data.samples[0].inputs[0].dims)
                throw std::invalid_argument("train: volumes must share dims");
        const auto [p, q] = slice_shape(data.samples[0].inputs[0].dims, axis);
        if (p != side || q != side)
            throw std::invalid_argument("train: slice shape " + std::to_string(p) + "x" +
                                        std::to_string(q) + " != N=" + std::to_string(side));
    }

    std::vector<SliceIndex> all;
    const int per_vol = slice_count(data.samples[0].inputs[0].dims, axis);
    for (int s = 0; s < static_cast<int>(data.samples.size()); ++s)
        for (int k = 0; k < per_vol; ++k) all.push_back({s, k});

    Rng data_rng(tcfg.seed ^ 0x9E3779B97F4A7C15ull);
    shuffle(all, data_rng);

    const auto n_total = static_cast<std::int64_t>(all.size());
    const auto n_val = static_cast<std::int64_t>(
        std::llround(static_cast<double>(n_total) * tcfg.validation_fraction));
    if (n_val < 1 || n_total - n_val < 1)
        throw std::invalid_argument("train: too few slices to split");
    std::vector<SliceIndex> train_set(all.begin(), all.begin() + (n_total - n_val));
    std::vector<SliceIndex> val_set(all.begin() + (n_total - n_val), all.end());

    Network net = build_network(cfg, tcfg.seed);
    auto params = net.params();
    AdamState adam = make_adam_state(params);

    std::vector<const ScalarGrid*> in_vols[8]; // per encoder track
    std::vector<const ScalarGrid*> tgt_vols[8];
    if (cfg.enc_tracks > 8 || cfg.dec_tracks > 8)
        throw std::invalid_argument("train: at most 8 tracks supported");
    for (const auto& s : data.samples) {
        for (int u = 0; u < cfg.enc_tracks; ++u)
            in_vols[u].push_back(&s.inputs[static_cast<std::size_t>(u)]);
        for (int v = 0; v < cfg.dec_tracks; ++v)
            tgt_vols[v].push_back(&s.targets[static_cast<std::size_t>(v)]);
    }

    auto run_batches = [&](const std::vector<SliceIndex>& order, bool optimize,
                           bool training_mode) {
        double loss_sum = 0.0;
        std::int64_t count = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tcfg.batch)) {
            const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(tcfg.batch));
            std::vector<Tensor4f> xs, ts;
            for (int u = 0; u < cfg.enc_tracks; ++u)
                xs.push_back(gather_slices(in_vols[u], order, b, e, axis));
            for (int v = 0; v < cfg.dec_tracks; ++v)
                ts.push_back(gather_slices(tgt_vols[v], order, b, e, axis));

            if (optimize) {
                Trace trace;
                auto probs = forward_impl(net, xs, true, &trace);
                loss_sum += batch_loss(probs, ts) * static_cast<double>(e - b);
                std::vector<Tensor4f> dlogits;
                for (std::size_t v = 0; v < probs.size(); ++v)
                    dlogits.push_back(bce_logit_grad(probs[v], ts[v],
                                                     1.0 / static_cast<double>(probs.size())));
                net.zero_grads();
                backward_impl(net, trace, dlogits);
                adam_step(params, adam, tcfg.adam);
            } else if (training_mode) {
                auto probs = forward_impl(net, xs, true, nullptr);
                loss_sum += batch_loss(probs, ts) * static_cast<double>(e - b);
            } else {
                auto probs = forward_infer(net, xs);
                loss_sum += batch_loss(probs, ts) * static_cast<double>(e - b);
            }
            count += static_cast<std::int64_t>(e - b);
        }
        return loss_sum / static_cast<double>(count);
    };

    TrainStats local;
    TrainStats& st = stats ? *stats : local;
    st.train_slices = static_cast<int>(train_set.size());
    st.val_slices = static_cast<int>(val_set.size());

    // pre-training loss in batch-statistics mode; BN running stats are
    // snapshotted so the probe run does not perturb the optimization
    {
        std::vector<std::vector<float>> saved;
        for (auto& p : params)
            if (!p.trainable) saved.emplace_back(p.values, p.values + p.count);
        st.initial_loss = run_batches(train_set, false, true);
        std::size_t i = 0;
        for (auto& p : params)
            if (!p.trainable) {
                std::copy(saved[i].begin(), saved[i].end(), p.values);
                ++i;
            }
    }

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        shuffle(train_set, data_rng);
        const double tl = run_batches(train_set, true, true);
        const double vl = run_batches(val_set, false, false);
        st.train_loss.push_back(tl);
        st.val_loss.push_back(vl);
        if (tcfg.verbose)
            std::fprintf(stderr, "epoch %3d  train %.5f  val %.5f\n", epoch, tl, vl);
    }
    return net;
}

// ---------------------------------------------------------------------------
// volume inference

std::vector<ScalarGrid> infer_direction(const Network& net,
                                        const std::vector<ScalarGrid>& inputs, Axis axis) {
    const auto& cfg = net.cfg;
    if (static_cast<int>(inputs.size()) != cfg.enc_tracks)
        throw std::invalid_argument("infer_direction: input count != encoder tracks");
    const auto dims = inputs[0].dims;
    for (const auto& g : inputs)
        if (g.dims != dims) throw std::invalid_argument("infer_direction: dims mismatch");
    const auto [p, q] = slice_shape(dims, axis);
    if (p != cfg.slice_side() || q != cfg.slice_side())
        throw std::invalid_argument("infer_direction: slice shape does not match network size");

    std::vector<ScalarGrid> out(static_cast<std::size_t>(cfg.dec_tracks),
                                ScalarGrid(dims.nx, dims.ny, dims.nz, inputs[0].voxel_mm));

    const int n_slices = slice_count(dims, axis);
    const int chunk = 16;
    for (int k0 = 0; k0 < n_slices; k0 += chunk) {
        const int k1 = std::min(n_slices, k0 + chunk);
        std::vector<Tensor4f> xs;
        for (const auto& g : inputs) {
            Tensor4f t(k1 - k0, 1, q, p);
            for (int k = k0; k < k1; ++k) {
                const auto s = slice_extract(g, axis, k);
                std::copy(s.data.begin(), s.data.end(), t.plane_ptr(k - k0, 0));
            }
            xs.push_back(std::move(t));
        }
        const auto probs = forward_infer(net, xs);
        for (int v = 0; v < cfg.dec_tracks; ++v)
            for (int k = k0; k < k1; ++k) {
                Slice2D s;
                s.axis = axis;
                s.index = k;
                s.p = p;
                s.q = q;
                s.data.assign(probs[static_cast<std::size_t>(v)].plane_ptr(k - k0, 0),
                              probs[static_cast<std::size_t>(v)].plane_ptr(k - k0, 0) +
                                  static_cast<std::size_t>(p) * q);
                slice_insert(out[static_cast<std::size_t>(v)], s);
            }
    }
    return out;
}

std::vector<ScalarGrid> infer_volume(const DirectionNets& nets,
                                     const std::vector<ScalarGrid>& inputs,
                                     const std::vector<TissueTable>& tables, double tau) {
    const auto& cfg = nets.axial.cfg;
    if (nets.sagittal.cfg.enc_tracks != cfg.enc_tracks ||
        nets.coronal.cfg.enc_tracks != cfg.enc_tracks ||
        nets.sagittal.cfg.dec_tracks != cfg.dec_tracks ||
        nets.coronal.cfg.dec_tracks != cfg.dec_tracks)
        throw std::invalid_argument("infer_volume: direction networks disagree on tracks");
    if (static_cast<int>(tables.size()) != cfg.dec_tracks)
        throw std::invalid_argument("infer_volume: need one tissue table per decoder track");

    const auto la = infer_direction(nets.axial, inputs, Axis::axial);
    const auto ls = infer_direction(nets.sagittal, inputs, Axis::sagittal);
    const auto lc = infer_direction(nets.coronal, inputs, Axis::coronal);

    std::vector<ScalarGrid> out;
    out.reserve(static_cast<std::size_t>(cfg.dec_tracks));
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        const auto avg = average_directions(la[static_cast<std::size_t>(v)],
                                            ls[static_cast<std::size_t>(v)],
                                            lc[static_cast<std::size_t>(v)]);
        const auto p = NormParams::from_table(tables[static_cast<std::size_t>(v)], tau);
        out.push_back(denormalize(avg, p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// weight file

void save_network(const Network& net, const std::string& path) {
    auto& mutable_net = const_cast<Network&>(net);
    auto params = mutable_net.params();

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    const auto& cfg = net.cfg;
    f << "CNW1\n";
    f << "config " << cfg.enc_tracks << ' ' << cfg.dec_tracks << ' ' << cfg.depth << ' '
      << cfg.size_exp << '\n';
    for (int u = 0; u < cfg.enc_tracks; ++u) {
        f << "kernels_r " << u;
        for (int k : cfg.enc_kernels[static_cast<std::size_t>(u)]) f << ' ' << k;
        f << '\n';
    }
    for (int v = 0; v < cfg.dec_tracks; ++v) {
        f << "kernels_s " << v;
        for (int k : cfg.cnv_kernels[static_cast<std::size_t>(v)]) f << ' ' << k;
        f << '\n';
    }
    for (int v = 0; v < cfg.dec_tracks; ++v)
        f << "kernels_t " << v << ' ' << cfg.map_kernels[static_cast<std::size_t>(v)] << '\n';

    f << "tensors " << params.size() << '\n';
    std::size_t offset = 0;
    for (const auto& p : params) {
        f << p.name << ' ' << p.shape.size();
        for (int d : p.shape) f << ' ' << d;
        f << ' ' << offset << '\n';
        offset += p.count * sizeof(float);
    }
    f << "end\n";
    for (const auto& p : params)
        f.write(reinterpret_cast<const char*>(p.values),
                static_cast<std::streamsize>(p.count * sizeof(float)));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Network load_network(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    auto next_line = [&]() {
        if (!std::getline(f, line)) throw std::runtime_error("truncated CNW1 file: " + path);
        return line;
    };
    if (next_line() != "CNW1") throw std::runtime_error("not a CNW1 weight file: " + path);

    NetConfig cfg;
    {
        std::istringstream ls(next_line());
        std::string key;
        int u, v, i, p;
        ls >> key >> u >> v >> i >> p;
        if (key != "config" || !ls) throw std::runtime_error("malformed CNW1 config: " + path);
        cfg = NetConfig::make(u, v, i, p);
    }
    struct TensorDecl {
        std::string name;
        std::vector<int> shape;
        std::size_t offset;
    };
    std::vector<TensorDecl> decls;
    while (true) {
        next_line();
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "kernels_r" || key == "kernels_s" || key == "kernels_t") {
            int idx;
            ls >> idx;
            std::vector<int> ks;
            int k;
            while (ls >> k) ks.push_back(k);
            if (key == "kernels_r") cfg.enc_kernels.at(static_cast<std::size_t>(idx)) = ks;
            else if (key == "kernels_s") cfg.cnv_kernels.at(static_cast<std::size_t>(idx)) = ks;
            else cfg.map_kernels.at(static_cast<std::size_t>(idx)) = ks.at(0);
        } else if (key == "tensors") {
            std::size_t count;
            ls >> count;
            for (std::size_t i = 0; i < count; ++i) {
                std::istringstream ts(next_line());
                TensorDecl d;
                std::size_t ndim;
                ts >> d.name >> ndim;
                for (std::size_t j = 0; j < ndim; ++j) {
                    int dim;
                    ts >> dim;
                    d.shape.push_back(dim);
                }
                ts >> d.offset;
                if (!ts) throw std::runtime_error("malformed CNW1 tensor line: " + path);
                decls.push_back(std::move(d));
            }
            if (next_line() != "end") throw std::runtime_error("missing CNW1 end marker: " + path);
            break;
        } else {
            throw std::runtime_error("unexpected CNW1 manifest line: " + line);
        }
    }
    cfg.validate();

    Network net = build_network(cfg, 0);
    auto params = net.params();
    if (params.size() != decls.size())
        throw std::runtime_error("CNW1 tensor count does not match architecture: " + path);
    const std::streampos payload = f.tellg();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        const auto& d = decls[i];
        if (p.name != d.name || p.shape != d.shape)
            throw std::runtime_error("CNW1 tensor mismatch at " + d.name + ": " + path);
        f.seekg(payload + static_cast<std::streamoff>(d.offset));
        f.read(reinterpret_cast<char*>(p.values),
               static_cast<std::streamsize>(p.count * sizeof(float)));
        if (f.gcount() != static_cast<std::streamsize>(p.count * sizeof(float)))
            throw std::runtime_error("CNW1 payload truncated at " + d.name + ": " + path);
    }
    return net;
}

} // namespace voldose
