#include "dirlatent/serialize.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "dirlatent/errors.hpp"

namespace dirlatent::serialize {

namespace {

constexpr char kTensorMagic[4] = {'D', 'L', 'T', '1'};
constexpr char kCheckpointMagic[4] = {'D', 'L', 'C', '1'};
constexpr int kMaxRank = 8;
constexpr int64_t kMaxElements = int64_t{1} << 40;

// Little-endian fixed-width writers. The host is little-endian on every
// platform this builds for; memcpy keeps the aliasing rules happy.
template <typename T>
void write_raw(std::ostream& os, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    if (!is) throw IoError(std::string("serialize: truncated input while reading ") + what);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

void write_string(std::ostream& os, const std::string& s) {
    write_raw<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const char* what, uint64_t max_len) {
    const uint64_t len = read_raw<uint64_t>(is, what);
    if (len > max_len) throw IoError(std::string("serialize: implausible length for ") + what);
    std::string s(static_cast<size_t>(len), '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw IoError(std::string("serialize: truncated input while reading ") + what);
    return s;
}

void expect_magic(std::istream& is, const char (&magic)[4], const char* what) {
    char buf[4];
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0) {
        throw IoError(std::string("serialize: not a ") + what + " stream (bad magic)");
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("serialize: cannot open '" + path + "' for writing");
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("serialize: cannot open '" + path + "' for reading");
    return is;
}

// Skips PPM whitespace and '#' comment lines, then parses one decimal field.
int ppm_field(std::istream& is) {
    int ch = is.get();
    while (is && (std::isspace(ch) || ch == '#')) {
        if (ch == '#') {
            while (is && ch != '\n') ch = is.get();
        }
        ch = is.get();
    }
    if (!is || !std::isdigit(ch)) throw IoError("serialize: malformed ppm header");
    int value = 0;
    while (is && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1 << 20) throw IoError("serialize: implausible ppm header field");
        ch = is.get();
    }
    return value;
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_tensor(std::ostream& os, const Tensor& t) {
    os.write(kTensorMagic, 4);
    write_raw<uint8_t>(os, static_cast<uint8_t>(t.rank()));
    for (int64_t i = 0; i < static_cast<int64_t>(t.rank()); ++i) {
        write_raw<uint32_t>(os, static_cast<uint32_t>(t.dim(i)));
    }
    for (int64_t i = 0; i < t.size(); ++i) write_raw<double>(os, t.at(i));
    if (!os) throw IoError("serialize: tensor write failed");
}

Tensor read_tensor(std::istream& is) {
    expect_magic(is, kTensorMagic, "tensor");
    const auto rank = read_raw<uint8_t>(is, "tensor rank");
    if (rank > kMaxRank) throw IoError("serialize: implausible tensor rank");
    Shape shape(rank);
    int64_t numel = 1;
    for (auto& d : shape) {
        d = read_raw<uint32_t>(is, "tensor extent");
        if (d <= 0 || numel > kMaxElements / d) {
            throw IoError("serialize: implausible tensor extents");
        }
        numel *= d;
    }
    std::vector<double> data(static_cast<size_t>(numel));
    for (auto& v : data) v = read_raw<double>(is, "tensor payload");
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
    auto os = open_out(path);
    write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
    auto is = open_in(path);
    return read_tensor(is);
}

uint64_t Checkpoint::config_digest() const {
    return fnv1a64(config_json.data(), config_json.size());
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw IoError("checkpoint: no tensor named '" + name + "'");
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    auto os = open_out(path);
    os.write(kCheckpointMagic, 4);
    write_string(os, ck.config_json);
    write_raw<uint64_t>(os, ck.config_digest());
    write_raw<uint32_t>(os, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, t] : ck.tensors) {
        write_string(os, name);
        write_tensor(os, t);
    }
    if (!os) throw IoError("serialize: checkpoint write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, kCheckpointMagic, "checkpoint");
    Checkpoint ck;
    ck.config_json = read_string(is, "checkpoint config", uint64_t{1} << 24);
    const auto digest = read_raw<uint64_t>(is, "checkpoint digest");
    if (digest != ck.config_digest()) {
        throw IoError("serialize: checkpoint config digest mismatch");
    }
    const auto count = read_raw<uint32_t>(is, "checkpoint tensor count");
    if (count > 1u << 20) throw IoError("serialize: implausible checkpoint tensor count");
    ck.tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = read_string(is, "checkpoint tensor name", 4096);
        ck.tensors.emplace_back(std::move(name), read_tensor(is));
    }
    return ck;
}

void write_ppm(const std::string& path, const Tensor& frame) {
    if (frame.rank() != 3 || frame.dim(2) != 3) {
        throw ContractError("serialize: ppm frames must be [h, w, 3], got " +
                            shape_str(frame.shape()));
    }
    auto os = open_out(path);
    os << "P6\n" << frame.dim(1) << ' ' << frame.dim(0) << "\n255\n";
    for (int64_t i = 0; i < frame.size(); ++i) {
        double v = frame.at(i);
        if (!(v > 0.0)) v = 0.0;  // NaN folds to black
        if (v > 1.0) v = 1.0;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    if (!os) throw IoError("serialize: ppm write failed");
}

Tensor read_ppm(const std::string& path) {
    auto is = open_in(path);
    char p = 0, six = 0;
    is.get(p).get(six);
    if (!is || p != 'P' || six != '6') throw IoError("serialize: not a binary ppm file");
    const int w = ppm_field(is);
    const int h = ppm_field(is);
    const int maxval = ppm_field(is);
    if (maxval != 255) throw IoError("serialize: only 8-bit ppm is supported");
    // ppm_field consumed the single whitespace byte that ends the header.
    std::vector<double> data(static_cast<size_t>(w) * static_cast<size_t>(h) * 3);
    for (auto& v : data) {
        const int ch = is.get();
        if (ch < 0) throw IoError("serialize: truncated ppm payload");
        v = static_cast<double>(ch) / 255.0;
    }
    return Tensor({h, w, 3}, std::move(data));
}

}  // namespace dirlatent::serialize
