#include "cardiospike/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "cardiospike/util/files.hpp"

namespace cardiospike::model {

namespace {

constexpr std::string_view kMagic = "CSPKCKPT";
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string take() { return std::move(out_); }

private:
    void put(std::uint64_t v, int bytes) {
        for (int i = 0; i < bytes; ++i) {
            out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
        }
    }
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw std::runtime_error("checkpoint: truncated at byte " + std::to_string(pos_));
        }
    }
    std::uint64_t get(int bytes) {
        need(static_cast<std::size_t>(bytes));
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(bytes);
        return v;
    }

    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry& Checkpoint::find(std::string_view key) const {
    for (const auto& e : entries) {
        if (e.key == key) {
            return e;
        }
    }
    throw std::out_of_range("checkpoint has no entry '" + std::string(key) + "'");
}

const CheckpointEntry& Checkpoint::last() const {
    if (entries.empty()) {
        throw std::out_of_range("checkpoint is empty");
    }
    return entries.back();
}

std::string checkpoint_key(std::size_t fold, std::size_t epoch) {
    return "fold" + std::to_string(fold) + "_epoch" + std::to_string(epoch);
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
    Writer w;
    w.raw(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(checkpoint.entries.size()));
    for (const auto& e : checkpoint.entries) {
        const auto& c = e.config;
        w.str(e.key);
        for (std::size_t field : {c.kernel_size, c.channels, c.hidden, c.side, c.layers, c.filters, c.length, c.pad,
                                  c.classes, c.se_reduction}) {
            w.u64(field);
        }
        w.u64(c.padding == tensor::Padding::replicate ? 0 : 1);
        const auto tensors = e.params.named();
        w.u32(static_cast<std::uint32_t>(tensors.size()));
        for (const auto& t : tensors) {
            w.str(t.name);
            w.u32(static_cast<std::uint32_t>(t.value.rank()));
            for (auto d : t.value.shape()) {
                w.u64(d);
            }
            for (double v : t.value.data()) {
                w.f64(v);
            }
        }
    }
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(kMagic.size()) != kMagic) {
        throw std::runtime_error("checkpoint: bad magic");
    }
    if (const auto version = r.u32(); version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    Checkpoint checkpoint;
    const auto count = r.u32();
    for (std::uint32_t e = 0; e < count; ++e) {
        CheckpointEntry entry;
        entry.key = r.str();
        auto& c = entry.config;
        for (std::size_t* field : {&c.kernel_size, &c.channels, &c.hidden, &c.side, &c.layers, &c.filters, &c.length,
                                   &c.pad, &c.classes, &c.se_reduction}) {
            *field = static_cast<std::size_t>(r.u64());
        }
        const auto padding = r.u64();
        if (padding > 1) {
            throw std::runtime_error("checkpoint: unknown padding mode " + std::to_string(padding));
        }
        c.padding = padding == 0 ? tensor::Padding::replicate : tensor::Padding::zero;
        entry.params = zero_params(c);

        auto slots = entry.params.named();
        const auto tensor_count = r.u32();
        if (tensor_count != slots.size()) {
            throw std::runtime_error("checkpoint: entry '" + entry.key + "' holds " + std::to_string(tensor_count) +
                                     " tensors, config implies " + std::to_string(slots.size()));
        }
        for (auto& slot : slots) {
            const auto name = r.str();
            if (name != slot.name) {
                throw std::runtime_error("checkpoint: expected tensor '" + slot.name + "', found '" + name + "'");
            }
            const auto rank = r.u32();
            tensor::Shape shape(rank);
            for (auto& d : shape) {
                d = static_cast<std::size_t>(r.u64());
            }
            if (shape != slot.value.shape()) {
                throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " + tensor::shape_string(shape) +
                                         ", expected " + tensor::shape_string(slot.value.shape()));
            }
            for (auto& v : slot.value.data()) {
                v = r.f64();
            }
        }
        checkpoint.entries.push_back(std::move(entry));
    }
    if (!r.done()) {
        throw std::runtime_error("checkpoint: trailing bytes");
    }
    return checkpoint;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    util::write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(util::read_file(path)); }

}  // namespace cardiospike::model
