#pragma once

#include <string>
#include <vector>

#include "tsonet/model/layers.hpp"

namespace tsonet {

// Cross-Stream Exchange Module. Both streams arrive at the same resolution
// and width C. A confidence mask predicted from the footprint features and a
// gating mask derived from the joint trunk modulate what each stream receives
// from the other; by default the exchange is residual on top of the inputs.
//
// Grouping rules: 3x3 convolutions are depth-wise; lightweight 1x1
// projections (the trunk bottleneck) are grouped; 1x1 convolutions that form
// control signals or exchanged features mix all channels.
template <class T>
struct csem_module {
    int64_t channels = 0;
    bool residual = true;

    conv2d_layer<T> conf_dw, conf_pw; // confidence branch: dw3x3 then 1x1 -> 1
    conv2d_layer<T> reduce;           // grouped 1x1, 2C -> C/M
    struct res_block {
        group_norm_layer<T> norm;
        conv2d_layer<T> dw1, dw2;
    };
    std::vector<res_block> blocks;    // depth-wise residual blocks at C/M
    conv2d_layer<T> restore;          // 1x1, C/M -> C
    conv2d_layer<T> gate;             // 1x1, C -> C
    conv2d_layer<T> proj_fp;          // exchanged footprint term, zero-init
    conv2d_layer<T> h_dw, h_pw;       // height branch: dw3x3 then 1x1, zero-init

    csem_module() = default;
    csem_module(module_builder<T> mb, int64_t c, int64_t reduction, int64_t n_blocks,
                int64_t norm_groups, bool residual_)
        : channels(c), residual(residual_) {
        const int64_t cm = c / reduction;
        conf_dw = conv2d_layer<T>(mb, "confidence.dw", c, c, 3, c);
        conf_pw = conv2d_layer<T>(mb, "confidence.pw", c, 1, 1);
        reduce = conv2d_layer<T>(mb, "trunk.reduce", 2 * c, cm, 1, fit_groups(cm, 4));
        for (int64_t i = 0; i < n_blocks; ++i) {
            res_block rb;
            const std::string name = "trunk.block" + std::to_string(i);
            rb.norm = group_norm_layer<T>(mb, name + ".norm", cm, norm_groups);
            rb.dw1 = conv2d_layer<T>(mb, name + ".dw1", cm, cm, 3, cm);
            rb.dw2 = conv2d_layer<T>(mb, name + ".dw2", cm, cm, 3, cm);
            blocks.push_back(std::move(rb));
        }
        restore = conv2d_layer<T>(mb, "trunk.restore", cm, c, 1);
        gate = conv2d_layer<T>(mb, "gate", c, c, 1);
        proj_fp = conv2d_layer<T>(mb, "exchange_fp", c, c, 1, 1, conv_init::zero);
        h_dw = conv2d_layer<T>(mb, "exchange_h.dw", c, c, 3, c);
        h_pw = conv2d_layer<T>(mb, "exchange_h.pw", c, c, 1, 1, conv_init::zero);
    }

    struct outputs {
        ag::var<T> refined_fp, refined_h;
        ag::var<T> confidence; // [1,H,W], in (0,1)
        ag::var<T> gate_mask;  // [C,H,W], in (0,1)
        ag::var<T> trunk;      // Z, [C,H,W]
    };

    outputs operator()(const ag::var<T>& f_fp, const ag::var<T>& f_h) const {
        check_contract(f_fp->value.shape() == f_h->value.shape(),
                       "csem: stream features must share one shape");
        outputs o;
        o.confidence = ag::sigmoid(conf_pw(conf_dw(f_fp)));

        auto z = reduce(ag::concat0(f_fp, f_h));
        for (const auto& rb : blocks)
            z = ag::add(z, rb.dw2(ag::gelu(rb.dw1(rb.norm(z)))));
        o.trunk = restore(z);

        o.gate_mask = ag::sigmoid(gate(o.trunk));
        auto ex_fp = ag::mul(proj_fp(o.trunk), o.gate_mask);
        auto ex_h = ag::mul_bcast_channel(ag::mul(h_pw(h_dw(o.trunk)), o.gate_mask),
                                          o.confidence);
        o.refined_fp = residual ? ag::add(f_fp, ex_fp) : ex_fp;
        o.refined_h = residual ? ag::add(f_h, ex_h) : ex_h;
        return o;
    }
};

} // namespace tsonet
