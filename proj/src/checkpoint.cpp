// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/checkpoint.hpp"

#include <fstream>

#include "prodsearch/binary_io.hpp"

namespace prodsearch {
namespace {

constexpr std::string_view kMagic = "PSCKPT01";

}  // namespace

void write_checkpoint(std::ostream& out, const Model<float>& model)
{
    using namespace binary;
    const auto& cfg = model.config();
    const auto& e = cfg.encoder;
    out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
    put_u32(out, kCheckpointVersion);
    for (auto v : {e.d_model, e.n_layers, e.n_heads, e.d_ff, e.query_len, e.field_len, e.flat_len, e.vocab_size,
                   cfg.head_hidden}) {
        put_u32(out, static_cast<std::uint32_t>(v));
    }
    put_u32(out, static_cast<std::uint32_t>(cfg.variant));
    put_f64(out, e.dropout);
    put_f64(out, cfg.head_dropout);
    put_u32(out, static_cast<std::uint32_t>(model.params().size()));
    for (const auto& p : model.params()) {
        put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
        put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            put_f32(out, p.value.data()[i]);
        }
    }
}

Model<float> read_checkpoint(std::istream& in)
{
    using namespace binary;
    expect_magic(in, kMagic, "checkpoint");
    auto version = get_u32(in);
    if (version != kCheckpointVersion) {
        throw InputError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelConfig cfg;
    auto& e = cfg.encoder;
    for (auto* v : {&e.d_model, &e.n_layers, &e.n_heads, &e.d_ff, &e.query_len, &e.field_len, &e.flat_len,
                    &e.vocab_size, &cfg.head_hidden}) {
        *v = get_u32(in);
    }
    auto variant = get_u32(in);
    if (variant > 1) {
        throw InputError("checkpoint has an unknown model variant");
    }
    cfg.variant = static_cast<Variant>(variant);
    e.dropout = get_f64(in);
    cfg.head_dropout = get_f64(in);
    cfg.validate();

    // Layout names come from the configuration; the file carries shapes only.
    auto model = Model<float>::create(cfg, 0);
    auto count = get_u32(in);
    if (count != model.params().size()) {
        throw InputError("checkpoint tensor count does not match its configuration");
    }
    for (auto& p : model.params()) {
        auto rows = get_u32(in);
        auto cols = get_u32(in);
        if (rows != p.value.rows() || cols != p.value.cols()) {
            throw InputError("checkpoint tensor " + p.name + " has an unexpected shape");
        }
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            p.value.data()[i] = get_f32(in);
        }
    }
    return model;
}

void write_manifest(std::ostream& out, const Model<float>& model)
{
    for (const auto& p : model.params()) {
        out << p.name << '\t' << p.value.rows() << '\t' << p.value.cols() << '\n';
    }
}

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write checkpoint " + path.string());
    }
    write_checkpoint(out, model);
    std::ofstream manifest(path.string() + ".manifest");
    write_manifest(manifest, model);
    if (!out || !manifest) {
        throw Error("failed writing checkpoint " + path.string());
    }
}

Model<float> load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open checkpoint " + path.string());
    }
    return read_checkpoint(in);
}

}  // namespace prodsearch
