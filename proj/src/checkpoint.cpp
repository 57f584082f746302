#include "gstk/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gstk/errors.hpp"

namespace gs {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'C', 'K'};

// Config scalars go through hexfloat so the blob round-trips bit-exactly.
std::string hex_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

double parse_hex_double(const std::string& s, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty()) {
        throw FormatError("bad numeric value for key '" + key + "': '" + s + "'");
    }
    return v;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
}

std::string build_config_blob(const Checkpoint& c) {
    std::ostringstream out;
    out << "k=" << c.tokenizer.k << '\n';
    out << "mask_prob=" << hex_double(c.tokenizer.mask_prob) << '\n';
    out << "tokenizer_seed=" << c.tokenizer.seed << '\n';
    out << "embed_width=" << c.model.embed_width << '\n';
    out << "n_layers=" << c.model.n_layers << '\n';
    out << "n_heads=" << c.model.n_heads << '\n';
    out << "mlp_ratio=" << c.model.mlp_ratio << '\n';
    out << "proj_width=" << c.model.proj_width << '\n';
    out << "head_hidden=" << c.model.head_hidden << '\n';
    out << "task=" << task_name(c.model.task) << '\n';
    out << "n_classes=" << c.model.n_classes << '\n';
    out << "seq_tokens=" << c.model.seq_tokens << '\n';
    out << "activation=" << (c.model.activation == ModelConfig::Act::gelu ? "gelu" : "relu")
        << '\n';
    out << "label_names=" << join_names(c.label_names) << '\n';
    out << "target_mean=" << hex_double(c.target_mean) << '\n';
    out << "target_scale=" << hex_double(c.target_scale) << '\n';
    out << "best_epoch=" << c.best_epoch << '\n';
    out << "best_val_metric=" << hex_double(c.best_val_metric) << '\n';
    return out.str();
}

void parse_config_blob(const std::string& blob, Checkpoint& c) {
    std::map<std::string, std::string> kv;
    std::istringstream in(blob);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line without '=': '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char* key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw FormatError(std::string("missing config key '") + key + "'");
        return it->second;
    };
    auto to_int = [&](const char* key) {
        const std::string& s = need(key);
        try {
            return std::stoi(s);
        } catch (const std::exception&) {
            throw FormatError("bad integer for key '" + std::string(key) + "': '" + s + "'");
        }
    };

    c.tokenizer.k = to_int("k");
    c.tokenizer.mask_prob = parse_hex_double(need("mask_prob"), "mask_prob");
    c.tokenizer.seed = std::stoull(need("tokenizer_seed"));
    c.model.k = c.tokenizer.k;
    c.model.embed_width = to_int("embed_width");
    c.model.n_layers = to_int("n_layers");
    c.model.n_heads = to_int("n_heads");
    c.model.mlp_ratio = to_int("mlp_ratio");
    c.model.proj_width = to_int("proj_width");
    c.model.head_hidden = to_int("head_hidden");
    c.model.task = task_from_name(need("task"));
    c.model.n_classes = to_int("n_classes");
    c.model.seq_tokens = to_int("seq_tokens");
    c.model.activation =
        need("activation") == "relu" ? ModelConfig::Act::relu : ModelConfig::Act::gelu;
    c.label_names = split_names(need("label_names"));
    c.target_mean = parse_hex_double(need("target_mean"), "target_mean");
    c.target_scale = parse_hex_double(need("target_scale"), "target_scale");
    c.best_epoch = to_int("best_epoch");
    c.best_val_metric = parse_hex_double(need("best_val_metric"), "best_val_metric");
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& out, const float* data, std::size_t n) {
    static_assert(sizeof(float) == 4);
    // Little-endian host assumed; the format is defined little-endian.
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

bool read_exact(std::istream& in, void* dst, std::size_t n) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!read_exact(in, b, 4)) {
        throw CorruptionError(std::string("truncated while reading ") + what);
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in, const char* what) {
    unsigned char b[8];
    if (!read_exact(in, b, 8)) {
        throw CorruptionError(std::string("truncated while reading ") + what);
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

Checkpoint make_checkpoint(Model& model, const TokenizerConfig& tok,
                           const std::vector<std::string>& label_names,
                           int best_epoch, double best_val_metric) {
    Checkpoint c;
    c.model = model.config();
    c.tokenizer = tok;
    c.label_names = label_names;
    c.target_mean = model.target_mean;
    c.target_scale = model.target_scale;
    c.best_epoch = best_epoch;
    c.best_val_metric = best_val_metric;
    for (auto& [name, p] : model.named_parameters()) {
        NamedTensor t;
        t.name = name;
        t.dims = p.shape();
        t.data.assign(p.values().begin(), p.values().end());
        c.tensors.push_back(std::move(t));
    }
    return c;
}

Model restore_model(const Checkpoint& ckpt) {
    Model model(ckpt.model);
    model.target_mean = ckpt.target_mean;
    model.target_scale = ckpt.target_scale;
    std::map<std::string, const NamedTensor*> by_name;
    for (const NamedTensor& t : ckpt.tensors) by_name[t.name] = &t;
    for (auto& [name, p] : model.named_parameters()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw FormatError("checkpoint is missing tensor '" + name + "'");
        }
        const NamedTensor& t = *it->second;
        if (t.dims != p.shape()) {
            throw FormatError("tensor '" + name + "' has dims " + shape_str(t.dims) +
                              ", model wants " + shape_str(p.shape()));
        }
        p.values().assign(t.data.begin(), t.data.end());
    }
    return model;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint '" + path + "'");

    out.write(kMagic, 4);
    write_u32(out, ckpt.version);

    const std::string blob = build_config_blob(ckpt);
    write_u32(out, static_cast<std::uint32_t>(blob.size()));
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

    for (const NamedTensor& t : ckpt.tensors) {
        write_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::size_t d : t.dims) write_u64(out, static_cast<std::uint64_t>(d));
        write_f32(out, t.data.data(), t.data.size());
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path + "'");

    char magic[4];
    if (!read_exact(in, magic, 4)) throw CorruptionError("file shorter than the magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad magic, not a checkpoint file");
    }

    Checkpoint c;
    c.version = read_u32(in, "version");
    if (c.version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(c.version) +
                          ", this build reads version " + std::to_string(kCheckpointVersion));
    }

    const std::uint32_t blob_len = read_u32(in, "config length");
    std::string blob(blob_len, '\0');
    if (!read_exact(in, blob.data(), blob_len)) {
        throw CorruptionError("truncated config blob");
    }
    parse_config_blob(blob, c);

    while (true) {
        const int probe = in.peek();
        if (probe == std::char_traits<char>::eof()) break;
        NamedTensor t;
        const std::uint32_t name_len = read_u32(in, "tensor name length");
        t.name.resize(name_len);
        if (!read_exact(in, t.name.data(), name_len)) {
            throw CorruptionError("truncated tensor name");
        }
        const std::uint32_t rank = read_u32(in, "tensor rank");
        if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
        std::size_t numel = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint64_t dim = read_u64(in, "tensor dim");
            t.dims.push_back(static_cast<std::size_t>(dim));
            numel *= static_cast<std::size_t>(dim);
        }
        t.data.resize(numel);
        if (!read_exact(in, t.data.data(), numel * 4)) {
            throw CorruptionError("truncated data for tensor '" + t.name + "'");
        }
        c.tensors.push_back(std::move(t));
    }
    return c;
}

}  // namespace gs
