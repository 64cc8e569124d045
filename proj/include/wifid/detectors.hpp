#pragma once

#include "wifid/detectors/ar.hpp"
#include "wifid/detectors/common.hpp"
#include "wifid/detectors/dml.hpp"
#include "wifid/detectors/msp.hpp"
#include "wifid/detectors/vae.hpp"

namespace wifid {

inline void save_detector(const std::string& path, const Detector& det,
                          const TrainConfig& cfg) {
    CheckpointMeta meta;
    meta.kind = det.kind();
    meta.oe_enabled = det.oe_trained();
    meta.seed = cfg.seed;
    meta.oe_lambda = det.oe_trained() ? cfg.oe.lambda : 0.0f;
    meta.beta = cfg.beta;
    meta.train_steps = det.train_steps;
    meta.arch = det.arch().pack();
    write_checkpoint(path, meta, det.layer_specs(), det.params(), det.buffers());
}

// Rebuild a detector of the checkpointed kind/architecture and load weights.
inline std::unique_ptr<Detector> load_detector(const std::string& path) {
    const Checkpoint ck = read_checkpoint(path);
    const ArchConfig arch = ArchConfig::unpack(ck.meta.arch);
    std::unique_ptr<Detector> det;
    switch (ck.meta.kind) {
        case ModelKind::Msp: {
            auto m = std::make_unique<MspModel>(arch, ck.meta.seed);
            m->set_oe_trained(ck.meta.oe_enabled);
            det = std::move(m);
            break;
        }
        case ModelKind::Dml: {
            auto m = std::make_unique<DmlModel>(arch, ck.meta.seed);
            m->set_oe_trained(ck.meta.oe_enabled);
            det = std::move(m);
            break;
        }
        case ModelKind::Vae: {
            auto m = std::make_unique<VaeModel>(arch, ck.meta.seed);
            m->set_oe_trained(ck.meta.oe_enabled);
            det = std::move(m);
            break;
        }
        case ModelKind::Ar:
            det = std::make_unique<ArDetector>(arch, ck.meta.seed, ck.meta.oe_enabled);
            break;
    }
    load_into(ck, det->params(), det->buffers());
    det->train_steps = ck.meta.train_steps;
    return det;
}

// Dispatch on kind; returned detector owns its trained weights.
inline std::unique_ptr<Detector> train_detector(ModelKind kind, const Dataset& din,
                                                const Dataset* dout_oe,
                                                const ArchConfig& arch,
                                                const TrainConfig& cfg) {
    switch (kind) {
        case ModelKind::Msp: return msp_train(din, dout_oe, arch, cfg);
        case ModelKind::Dml: return dml_train(din, dout_oe, arch, cfg);
        case ModelKind::Vae: return vae_train(din, dout_oe, arch, cfg);
        case ModelKind::Ar: return ar_train(din, dout_oe, arch, cfg);
    }
    throw std::invalid_argument("train_detector: unknown model kind");
}

}  // namespace wifid
