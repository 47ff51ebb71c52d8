#pragma once

// Versioned text checkpoint:
//
//   AUI-NN-CHECKPOINT 1
//   kind <predictor|mlp>
//   meta <key> <value>          (zero or more)
//   tensor <name> <rows> <cols>
//   <rows*cols values, %.17g, space separated>
//   ...
//   end

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "aui/nn/lstm.hpp"
#include "aui/nn/mlp.hpp"

namespace aui::nn {

inline constexpr std::string_view kCheckpointMagic = "AUI-NN-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vector values;
};

struct Checkpoint {
    std::string kind;
    std::map<std::string, std::string> meta;
    std::vector<NamedTensor> tensors;
};

std::string write_checkpoint(const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint to_checkpoint(const PredictorParams& p);
Checkpoint to_checkpoint(const MlpParams& p);
PredictorParams predictor_from_checkpoint(const Checkpoint& ckpt);
MlpParams mlp_from_checkpoint(const Checkpoint& ckpt);

}  // namespace aui::nn
