#include "vadeers/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vadeers/error.hpp"

namespace vadeers::train {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'A', 'D', 'E', 'E', 'R', 'S', '\0'};

struct Tensor {
    std::string name;
    const nn::Matrix* value;
};

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw DataError("checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

nn::Matrix row_of(const std::vector<double>& v) { return nn::Matrix(1, v.size(), v); }

void require_dim(const char* what, std::size_t file, std::size_t expected) {
    if (file != expected) {
        throw DataError(std::string("checkpoint ") + what + " is " + std::to_string(file) + ", expected " +
                        std::to_string(expected));
    }
}

}  // namespace

model::Vadeers Checkpoint::model() const { return model::Vadeers::bind(config, params); }

Checkpoint make_checkpoint(const model::Vadeers& m, std::optional<data::Scaler> scaler, nlohmann::json meta) {
    Checkpoint c;
    c.config = m.config();
    c.params = m.params();
    c.scaler = std::move(scaler);
    c.meta = std::move(meta);
    return c;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::vector<nn::Matrix> extra;
    std::vector<Tensor> tensors;
    for (nn::ParamId id = 0; id < ck.params.size(); ++id) tensors.push_back({ck.params.name(id), &ck.params.value(id)});
    if (ck.scaler) {
        const auto& s = *ck.scaler;
        extra.reserve(7);
        for (const auto& [name, v] : {std::pair{"scaler.smiles.mean", &s.smiles.mean},
                                      std::pair{"scaler.smiles.scale", &s.smiles.scale},
                                      std::pair{"scaler.ip.mean", &s.ip.mean},
                                      std::pair{"scaler.ip.scale", &s.ip.scale},
                                      std::pair{"scaler.cells.mean", &s.cells.mean},
                                      std::pair{"scaler.cells.scale", &s.cells.scale}}) {
            extra.push_back(row_of(*v));
            tensors.push_back({name, &extra.back()});
        }
        extra.push_back(nn::Matrix(1, 2, std::vector<double>{s.ic50_mean, s.ic50_scale}));
        tensors.push_back({"scaler.ic50", &extra.back()});
    }

    nlohmann::json table = nlohmann::json::array();
    for (const auto& t : tensors) {
        table.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
    }
    const nlohmann::json header{{"config", ck.config},
                                {"prior_variant", std::string(model::to_string(ck.config.prior))},
                                {"tensors", table},
                                {"has_scaler", ck.scaler.has_value()},
                                {"meta", ck.meta}};
    const std::string text = header.dump();

    std::string out(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, text.size());
    out += text;
    for (const auto& t : tensors) {
        const auto d = t.value->data();
        out.append(reinterpret_cast<const char*>(d.data()), d.size() * sizeof(double));
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig* expected) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path.string());
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0) {
        throw DataError(path.string() + " is not a checkpoint file");
    }
    std::size_t pos = sizeof kMagic;
    const auto version = take<std::uint32_t>(in, pos);
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint format version " + std::to_string(version) + ", this build reads version " +
                        std::to_string(kCheckpointVersion));
    }
    const auto header_len = take<std::uint64_t>(in, pos);
    if (pos + header_len > in.size()) throw DataError("checkpoint truncated");
    nlohmann::json header;
    Checkpoint ck;
    try {
        header = nlohmann::json::parse(in.substr(pos, header_len));
        ck.config = header.at("config").get<model::ModelConfig>();
        ck.meta = header.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header: ") + e.what());
    }
    pos += header_len;

    if (expected) {
        require_dim("smiles_dim", ck.config.smiles_dim, expected->smiles_dim);
        require_dim("ip_dim", ck.config.ip_dim, expected->ip_dim);
        require_dim("bio_dim", ck.config.bio_dim, expected->bio_dim);
        require_dim("latent_dim", ck.config.latent_dim, expected->latent_dim);
        require_dim("components", ck.config.components, expected->components);
        if (ck.config.prior != expected->prior) {
            throw DataError("checkpoint prior is " + std::string(model::to_string(ck.config.prior)) + ", expected " +
                            std::string(model::to_string(expected->prior)));
        }
        if (!(ck.config == *expected)) throw DataError("checkpoint architecture differs from the expected config");
    }

    std::map<std::string, nn::Matrix> scaler_parts;
    for (const auto& t : header.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto rows = t.at("rows").get<std::size_t>();
        const auto cols = t.at("cols").get<std::size_t>();
        const std::size_t bytes = rows * cols * sizeof(double);
        if (pos + bytes > in.size()) throw DataError("checkpoint truncated in tensor " + name);
        std::vector<double> values(rows * cols);
        std::memcpy(values.data(), in.data() + pos, bytes);
        pos += bytes;
        nn::Matrix m(rows, cols, std::move(values));
        if (name.starts_with("scaler.")) {
            scaler_parts.emplace(name, std::move(m));
        } else {
            ck.params.add(name, std::move(m));
        }
    }
    if (pos != in.size()) throw DataError("checkpoint has trailing bytes");

    if (header.value("has_scaler", false)) {
        auto part = [&](const std::string& name) -> const std::vector<double>& {
            auto it = scaler_parts.find(name);
            if (it == scaler_parts.end()) throw DataError("checkpoint is missing " + name);
            return it->second.storage();
        };
        data::Scaler s;
        s.smiles = {part("scaler.smiles.mean"), part("scaler.smiles.scale")};
        s.ip = {part("scaler.ip.mean"), part("scaler.ip.scale")};
        s.cells = {part("scaler.cells.mean"), part("scaler.cells.scale")};
        const auto& ic = part("scaler.ic50");
        if (ic.size() != 2) throw DataError("checkpoint scaler.ic50 must hold two values");
        s.ic50_mean = ic[0];
        s.ic50_scale = ic[1];
        ck.scaler = std::move(s);
    }
    // Validates every name and shape against the config.
    try {
        (void)model::Vadeers::bind(ck.config, ck.params);
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint parameters do not match its config: ") + e.what());
    }
    return ck;
}

}  // namespace vadeers::train
