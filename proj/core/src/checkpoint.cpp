#include "deter/checkpoint.hpp"

#include "binary.hpp"
#include "deter/error.hpp"

namespace deter {

namespace {
constexpr char kMagic[4] = {'D', 'E', 'T', 'M'};
}

std::string serialize_model(const Model& m) {
    detail::ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    const auto& c = m.config;
    w.u64(c.d_tsdae);
    w.u64(c.d_use);
    w.u32(static_cast<std::uint32_t>(c.tsdae_hidden.size()));
    for (auto v : c.tsdae_hidden) w.u64(v);
    w.u32(static_cast<std::uint32_t>(c.use_hidden.size()));
    for (auto v : c.use_hidden) w.u64(v);
    w.f64(c.dropout_rate);
    w.u64(c.n_classes);
    w.u32(static_cast<std::uint32_t>(c.activation));
    w.u64(c.seed);
    w.u64(param_count(m));
    m.params.for_each_layer([&](const DenseLayer<float>& l) {
        for (float v : l.weights) w.f32(v);
        for (float v : l.bias) w.f32(v);
    });
    return w.take();
}

Model deserialize_model(const std::string& bytes) {
    detail::ByteReader r(bytes, "checkpoint");
    if (r.bytes(4) != std::string(kMagic, 4)) fail(ErrorKind::format, "checkpoint: bad magic at byte offset 0");
    const auto version = r.u32();
    require(version == kCheckpointVersion, ErrorKind::format,
            "checkpoint: unsupported version " + std::to_string(version) + " at byte offset 4");

    ModelConfig c;
    c.d_tsdae = r.u64();
    c.d_use = r.u64();
    c.tsdae_hidden.resize(r.u32());
    for (auto& v : c.tsdae_hidden) v = r.u64();
    c.use_hidden.resize(r.u32());
    for (auto& v : c.use_hidden) v = r.u64();
    c.dropout_rate = r.f64();
    c.n_classes = r.u64();
    const auto act = r.u32();
    require(act == static_cast<std::uint32_t>(Activation::relu), ErrorKind::format,
            "checkpoint: unknown activation " + std::to_string(act));
    c.activation = Activation::relu;
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorKind::format, std::string("checkpoint: invalid config block: ") + e.what());
    }

    const auto declared = r.u64();
    const auto expected = param_count(c);
    require(declared == expected, ErrorKind::format,
            "checkpoint: declared parameter count " + std::to_string(declared) + " != config implies " +
                std::to_string(expected));
    r.need(expected * 4);

    Model m = init_model<float>(c);
    m.params.for_each_layer([&](DenseLayer<float>& l) {
        for (float& v : l.weights) v = r.f32();
        for (float& v : l.bias) v = r.f32();
    });
    require(r.remaining() == 0, ErrorKind::format,
            "checkpoint: " + std::to_string(r.remaining()) + " trailing bytes at offset " + std::to_string(r.offset()));
    return m;
}

void save_model(const Model& m, const std::string& path) { detail::write_file(path, serialize_model(m)); }

Model load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

}  // namespace deter
