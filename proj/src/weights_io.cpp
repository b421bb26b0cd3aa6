#include "swg/weights_io.hpp"

#include "swg/error.hpp"
#include "swg/io.hpp"

#include <bit>
#include <cstring>

namespace swg::model {

namespace {

static_assert(std::endian::native == std::endian::little, "weight I/O assumes a little-endian host");

template <typename T>
void put(std::string & out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view b) : bytes_(b) {}

    template <typename T>
    T get(const std::string & field) {
        T v;
        need(sizeof(T), field);
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string_view take(std::size_t n, const std::string & field) {
        need(n, field);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const std::string & field) const {
        if (bytes_.size() - pos_ < n)
            throw FormatError(field, "truncated: need " + std::to_string(n) + " bytes, " +
                                         std::to_string(bytes_.size() - pos_) + " left");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

constexpr const char * kConfigFields[7] = {"vocab", "hidden", "heads", "layers", "max_seq", "class_count", "mlp_mult"};

} // namespace

std::string encode_weights(const ModelWeights & w) {
    std::string out;
    out.append(kWeightMagic, 4);
    put<uint16_t>(out, kWeightVersion);
    const auto & c = w.config;
    for (int v : {c.vocab, c.hidden, c.heads, c.layers, c.max_seq, c.class_count, c.mlp_mult}) put<int32_t>(out, v);

    uint32_t count = 0;
    w.visit([&](const std::string &, const float *, int, int) { ++count; });
    put<uint32_t>(out, count);
    w.visit([&](const std::string & name, const float *, int r, int cols) {
        put<uint16_t>(out, uint16_t(name.size()));
        out += name;
        put<uint32_t>(out, uint32_t(r));
        put<uint32_t>(out, uint32_t(cols));
    });
    w.visit([&](const std::string &, const float * d, int r, int cols) {
        out.append(reinterpret_cast<const char *>(d), std::size_t(r) * cols * sizeof(float));
    });
    return out;
}

ModelWeights decode_weights(std::string_view bytes) {
    Reader rd(bytes);
    const auto magic = rd.take(4, "magic");
    if (std::memcmp(magic.data(), kWeightMagic, 4) != 0) throw FormatError("magic", "not an SWGW weight file");
    const auto version = rd.get<uint16_t>("version");
    if (version != kWeightVersion)
        throw FormatError("version", "unsupported format version " + std::to_string(version));

    ModelConfig cfg;
    int * fields[7] = {&cfg.vocab, &cfg.hidden, &cfg.heads, &cfg.layers, &cfg.max_seq, &cfg.class_count, &cfg.mlp_mult};
    for (int i = 0; i < 7; ++i) *fields[i] = rd.get<int32_t>(std::string("config.") + kConfigFields[i]);
    try {
        cfg.validate();
    } catch (const InvalidArgument & e) {
        throw FormatError("config", e.what());
    }

    ModelWeights w = ModelWeights::zeros(cfg);
    uint32_t expected = 0;
    w.visit([&](const std::string &, const float *, int, int) { ++expected; });
    const auto count = rd.get<uint32_t>("tensor_count");
    if (count != expected)
        throw FormatError("tensor_count", "file has " + std::to_string(count) + " tensors, config implies " +
                                              std::to_string(expected));

    w.visit([&](const std::string & name, float *, int r, int c) {
        const auto len = rd.get<uint16_t>("directory");
        const auto got = rd.take(len, "directory");
        if (got != name) throw FormatError(name, "directory entry is '" + std::string(got) + "'");
        const auto fr = rd.get<uint32_t>(name);
        const auto fc = rd.get<uint32_t>(name);
        if (fr != uint32_t(r) || fc != uint32_t(c))
            throw FormatError(name, "shape " + std::to_string(fr) + "x" + std::to_string(fc) + ", expected " +
                                        std::to_string(r) + "x" + std::to_string(c));
    });
    w.visit([&](const std::string & name, float * d, int r, int c) {
        const std::size_t n = std::size_t(r) * c * sizeof(float);
        const auto raw = rd.take(n, name);
        std::memcpy(d, raw.data(), n);
    });
    if (rd.remaining() != 0) throw FormatError("trailer", std::to_string(rd.remaining()) + " unexpected bytes");
    return w;
}

void save_weights(const ModelWeights & w, const std::filesystem::path & path) {
    io::write_file_atomic(path, encode_weights(w));
}

ModelWeights load_weights(const std::filesystem::path & path) { return decode_weights(io::read_file(path)); }

} // namespace swg::model
