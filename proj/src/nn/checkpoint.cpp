#include "aui/nn/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace aui::nn {

namespace {

template <typename P>
Checkpoint params_to_checkpoint(const P& p, std::string kind) {
    Checkpoint ckpt;
    ckpt.kind = std::move(kind);
    for (const auto& t : tensors(p)) ckpt.tensors.push_back({t.name, t.rows, t.cols, Vector(t.values.begin(), t.values.end())});
    return ckpt;
}

const NamedTensor& find_tensor(const Checkpoint& ckpt, const std::string& name) {
    for (const auto& t : ckpt.tensors)
        if (t.name == name) return t;
    throw std::runtime_error("checkpoint is missing tensor \"" + name + "\"");
}

// Copies checkpoint tensors into an already-shaped parameter struct.
template <typename P>
void fill_from(P& p, const Checkpoint& ckpt) {
    for (auto& t : tensors(p)) {
        const auto& src = find_tensor(ckpt, t.name);
        if (src.rows != t.rows || src.cols != t.cols)
            throw std::runtime_error("checkpoint tensor \"" + t.name + "\" has unexpected shape");
        std::copy(src.values.begin(), src.values.end(), t.values.begin());
    }
}

bool has_tensor(const Checkpoint& ckpt, const std::string& name) {
    for (const auto& t : ckpt.tensors)
        if (t.name == name) return true;
    return false;
}

}  // namespace

std::string write_checkpoint(const Checkpoint& ckpt) {
    std::string out = std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion) + "\n";
    out += "kind " + ckpt.kind + "\n";
    for (const auto& [k, v] : ckpt.meta) {
        if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
            throw std::invalid_argument("checkpoint meta key/value contains whitespace or newline");
        out += "meta " + k + " " + v + "\n";
    }
    char buf[32];
    for (const auto& t : ckpt.tensors) {
        out += "tensor " + t.name + " " + std::to_string(t.rows) + " " + std::to_string(t.cols) + "\n";
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", t.values[i]);
            if (i) out += ' ';
            out += buf;
        }
        out += "\n";
    }
    out += "end\n";
    return out;
}

Checkpoint read_checkpoint(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kCheckpointMagic) throw std::runtime_error("not a checkpoint file");
    if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    std::string word;
    while (in >> word) {
        if (word == "end") return ckpt;
        if (word == "kind") {
            in >> ckpt.kind;
        } else if (word == "meta") {
            std::string key, value;
            in >> key;
            std::getline(in, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ckpt.meta[key] = value;
        } else if (word == "tensor") {
            NamedTensor t;
            if (!(in >> t.name >> t.rows >> t.cols)) throw std::runtime_error("bad tensor header");
            t.values.resize(t.rows * t.cols);
            for (double& v : t.values) {
                std::string tok;
                if (!(in >> tok)) throw std::runtime_error("truncated tensor \"" + t.name + "\"");
                char* end = nullptr;
                v = std::strtod(tok.c_str(), &end);
                if (end != tok.c_str() + tok.size()) throw std::runtime_error("bad value in tensor \"" + t.name + "\"");
            }
            ckpt.tensors.push_back(std::move(t));
        } else {
            throw std::runtime_error("unexpected checkpoint record \"" + word + "\"");
        }
    }
    throw std::runtime_error("checkpoint is missing its end marker");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << write_checkpoint(ckpt);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return read_checkpoint(ss.str());
}

Checkpoint to_checkpoint(const PredictorParams& p) { return params_to_checkpoint(p, "predictor"); }
Checkpoint to_checkpoint(const MlpParams& p) { return params_to_checkpoint(p, "mlp"); }

PredictorParams predictor_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "predictor") throw std::runtime_error("checkpoint kind is \"" + ckpt.kind + "\", expected predictor");
    const auto& emb = find_tensor(ckpt, "embedding");
    const auto& out_w = find_tensor(ckpt, "out.w");
    std::size_t layers = 0;
    while (has_tensor(ckpt, "lstm" + std::to_string(layers) + ".w_h")) ++layers;
    PredictorParams p = zero_predictor({emb.rows, emb.cols, out_w.cols, layers});
    fill_from(p, ckpt);
    return p;
}

MlpParams mlp_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind != "mlp") throw std::runtime_error("checkpoint kind is \"" + ckpt.kind + "\", expected mlp");
    std::vector<std::size_t> widths;
    for (std::size_t l = 0; has_tensor(ckpt, "dense" + std::to_string(l) + ".w"); ++l) {
        const auto& w = find_tensor(ckpt, "dense" + std::to_string(l) + ".w");
        if (l == 0) widths.push_back(w.cols);
        widths.push_back(w.rows);
    }
    MlpParams p = zero_mlp(widths);
    fill_from(p, ckpt);
    return p;
}

}  // namespace aui::nn
