#include "csm/io/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "csm/error.hpp"

namespace csm::io {

namespace {

enum class FieldType : std::uint8_t { U64 = 1, F64 = 2, Str = 3, Tensor = 4 };

const char* typeName(FieldType t) {
    switch (t) {
        case FieldType::U64: return "u64";
        case FieldType::F64: return "f64";
        case FieldType::Str: return "string";
        case FieldType::Tensor: return "tensor";
    }
    return "?";
}

void putU64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Writer {
public:
    void u64(const std::string& name, std::uint64_t v) {
        std::vector<std::uint8_t> p;
        putU64(p, v);
        add(name, FieldType::U64, p);
    }
    void f64(const std::string& name, double v) {
        std::vector<std::uint8_t> p;
        putU64(p, std::bit_cast<std::uint64_t>(v));
        add(name, FieldType::F64, p);
    }
    void str(const std::string& name, const std::string& v) { add(name, FieldType::Str, {v.begin(), v.end()}); }
    void tensor(const std::string& name, const ad::Tensor& t) {
        std::vector<std::uint8_t> p;
        putU64(p, t.rows());
        putU64(p, t.cols());
        for (double v : t.data()) putU64(p, std::bit_cast<std::uint64_t>(v));
        add(name, FieldType::Tensor, p);
    }

    std::vector<std::uint8_t> finish() const {
        std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
        putU32(out, kCheckpointVersion);
        putU32(out, static_cast<std::uint32_t>(count_));
        out.insert(out.end(), body_.begin(), body_.end());
        putU64(out, fnv1a(out));
        return out;
    }

private:
    void add(const std::string& name, FieldType type, const std::vector<std::uint8_t>& payload) {
        if (name.size() > 0xFFFF) throw InvalidArgument("checkpoint field name too long");
        body_.push_back(static_cast<std::uint8_t>(name.size()));
        body_.push_back(static_cast<std::uint8_t>(name.size() >> 8));
        body_.insert(body_.end(), name.begin(), name.end());
        body_.push_back(static_cast<std::uint8_t>(type));
        putU64(body_, payload.size());
        body_.insert(body_.end(), payload.begin(), payload.end());
        ++count_;
    }

    std::vector<std::uint8_t> body_;
    std::size_t count_ = 0;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::span<const std::uint8_t> take(std::uint64_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

struct Field {
    FieldType type;
    std::span<const std::uint8_t> payload;
};

class FieldTable {
public:
    explicit FieldTable(std::map<std::string, Field> fields) : fields_(std::move(fields)) {}

    bool has(const std::string& name) const { return fields_.count(name) != 0; }

    std::uint64_t u64(const std::string& name) const { return Reader(get(name, FieldType::U64)).u64(); }
    double f64(const std::string& name) const { return std::bit_cast<double>(Reader(get(name, FieldType::F64)).u64()); }
    std::string str(const std::string& name) const {
        const auto p = get(name, FieldType::Str);
        return {p.begin(), p.end()};
    }
    ad::Tensor tensor(const std::string& name) const {
        Reader r(get(name, FieldType::Tensor));
        const auto rows = r.u64(), cols = r.u64();
        if (rows == 0 || cols == 0 || rows > (1u << 30) || cols > (1u << 30)) throw FormatError("field '" + name + "': bad tensor shape");
        std::vector<double> data(rows * cols);
        for (auto& v : data) v = std::bit_cast<double>(r.u64());
        if (!r.done()) throw FormatError("field '" + name + "': trailing bytes");
        return ad::Tensor({rows, cols}, std::move(data));
    }
    const std::map<std::string, Field>& all() const { return fields_; }

private:
    std::span<const std::uint8_t> get(const std::string& name, FieldType type) const {
        const auto it = fields_.find(name);
        if (it == fields_.end()) throw FormatError("checkpoint is missing field '" + name + "'");
        if (it->second.type != type)
            throw FormatError("field '" + name + "' has type " + typeName(it->second.type) + ", expected " + typeName(type));
        return it->second.payload;
    }

    std::map<std::string, Field> fields_;
};

const std::string kParamPrefix = "param:";
const std::string kDatasetParamPrefix = "dataset.param:";

}  // namespace

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::uint8_t> encodeCheckpoint(const model::CsmModel& m, const CheckpointInfo& info) {
    const auto& hp = m.hp;
    Writer w;
    w.str("hp.arch", model::architectureName(hp.arch));
    w.u64("hp.input_width", hp.inputWidth);
    w.u64("hp.n_concepts", hp.nConcepts);
    w.u64("hp.n_tasks", hp.nTasks);
    w.u64("hp.emb_size", hp.embSize);
    w.u64("hp.concept_emb", hp.conceptEmb);
    w.u64("hp.n_rules", hp.nRules);
    w.u64("hp.rule_emb", hp.ruleEmb);
    w.u64("hp.additive_heads", hp.additiveHeads ? 1 : 0);
    w.u64("hp.cmr_all_rules", hp.cmrAllRules ? 1 : 0);
    w.str("hp.prior_mode", model::priorModeName(hp.priorMode));
    w.u64("hp.task_group", hp.taskGroup);
    for (const auto& p : m.store.all()) w.tensor(kParamPrefix + p.name, p.value);
    if (!m.marginalPrior.empty()) w.tensor("prior.marginal", m.marginalPrior);
    w.str("dataset.generator", info.dataset.generator);
    w.u64("dataset.seed", info.dataset.seed);
    for (const auto& [k, v] : info.dataset.params) w.f64(kDatasetParamPrefix + k, v);
    w.u64("history.epochs", info.epochsTrained);
    w.u64("history.best_epoch", info.bestEpoch);
    w.f64("history.best_val_loss", info.bestValLoss);
    w.str("history.failure", info.failure);
    return w.finish();
}

Checkpoint decodeCheckpoint(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kHeader = sizeof(kCheckpointMagic) + 8;
    if (bytes.size() < kHeader + 8 || std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw FormatError("not a checkpoint file (bad magic)");
    const auto content = bytes.first(bytes.size() - 8);
    if (Reader(bytes.last(8)).u64() != fnv1a(content)) throw ChecksumError("checkpoint checksum mismatch: file is corrupted");

    Reader r(content);
    r.take(sizeof(kCheckpointMagic));
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    const auto count = r.u32();
    std::map<std::string, Field> fields;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto nameBytes = r.take(r.u16());
        std::string name(nameBytes.begin(), nameBytes.end());
        const auto type = static_cast<FieldType>(r.u8());
        if (type < FieldType::U64 || type > FieldType::Tensor) throw FormatError("field '" + name + "' has unknown type");
        const auto payload = r.take(r.u64());
        if (!fields.emplace(name, Field{type, payload}).second) throw FormatError("duplicate field '" + name + "'");
    }
    if (!r.done()) throw FormatError("checkpoint has trailing bytes after the field table");
    const FieldTable t(std::move(fields));

    model::Hyperparameters hp;
    hp.arch = model::parseArchitecture(t.str("hp.arch"));
    hp.inputWidth = t.u64("hp.input_width");
    hp.nConcepts = t.u64("hp.n_concepts");
    hp.nTasks = t.u64("hp.n_tasks");
    hp.embSize = t.u64("hp.emb_size");
    hp.conceptEmb = t.u64("hp.concept_emb");
    hp.nRules = t.u64("hp.n_rules");
    hp.ruleEmb = t.u64("hp.rule_emb");
    hp.additiveHeads = t.u64("hp.additive_heads") != 0;
    hp.cmrAllRules = t.u64("hp.cmr_all_rules") != 0;
    hp.priorMode = model::parsePriorMode(t.str("hp.prior_mode"));
    hp.taskGroup = t.u64("hp.task_group");

    Checkpoint ck{model::CsmModel::create(hp, 0), {}};
    auto& store = ck.model.store;
    std::size_t stored = 0;
    for (const auto& [name, field] : t.all())
        if (name.rfind(kParamPrefix, 0) == 0) ++stored;
    if (stored != store.size())
        throw FormatError("checkpoint holds " + std::to_string(stored) + " parameters, architecture expects " + std::to_string(store.size()));
    for (std::size_t id = 0; id < store.size(); ++id) {
        const auto& name = store.name(id);
        auto value = t.tensor(kParamPrefix + name);
        if (!value.sameShape(store.value(id)))
            throw FormatError("parameter '" + name + "' has shape " + value.shapeString() + ", expected " + store.value(id).shapeString());
        store.value(id) = std::move(value);
    }
    if (t.has("prior.marginal"))
        ck.model.setPrior({model::PriorMode::Marginalized, hp.sidechannelKind(), t.tensor("prior.marginal")});

    auto& info = ck.info;
    info.dataset.generator = t.str("dataset.generator");
    info.dataset.seed = t.u64("dataset.seed");
    for (const auto& [name, field] : t.all())
        if (name.rfind(kDatasetParamPrefix, 0) == 0) info.dataset.params[name.substr(kDatasetParamPrefix.size())] = t.f64(name);
    info.epochsTrained = t.u64("history.epochs");
    info.bestEpoch = t.u64("history.best_epoch");
    info.bestValLoss = t.f64("history.best_val_loss");
    info.failure = t.str("history.failure");
    return ck;
}

void saveCheckpoint(const std::filesystem::path& path, const model::CsmModel& m, const CheckpointInfo& info) {
    const auto bytes = encodeCheckpoint(m, info);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Checkpoint loadCheckpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decodeCheckpoint(bytes);
}

void writeParameterDump(const std::filesystem::path& path, const model::CsmModel& m, const CheckpointInfo& info) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    const auto& hp = m.hp;
    out << "# csmlab checkpoint v" << kCheckpointVersion << "\n"
        << "arch " << model::architectureName(hp.arch) << "\n"
        << "input_width " << hp.inputWidth << "\nn_concepts " << hp.nConcepts << "\nn_tasks " << hp.nTasks << "\nemb_size "
        << hp.embSize << "\nconcept_emb " << hp.conceptEmb << "\nn_rules " << hp.nRules << "\nrule_emb " << hp.ruleEmb
        << "\nadditive_heads " << hp.additiveHeads << "\ncmr_all_rules " << hp.cmrAllRules << "\nprior_mode "
        << model::priorModeName(hp.priorMode) << "\ntask_group " << hp.taskGroup << "\n"
        << "dataset " << info.dataset.generator << " seed=" << info.dataset.seed;
    for (const auto& [k, v] : info.dataset.params) out << " " << k << "=" << num(v);
    out << "\nepochs " << info.epochsTrained << " best_epoch " << info.bestEpoch << " best_val_loss " << num(info.bestValLoss) << "\n";
    auto dump = [&](const std::string& name, const ad::Tensor& t) {
        out << "\n" << name << " " << t.rows() << "x" << t.cols() << "\n";
        for (std::size_t i = 0; i < t.rows(); ++i) {
            for (std::size_t j = 0; j < t.cols(); ++j) out << (j ? " " : "") << num(t(i, j));
            out << "\n";
        }
    };
    for (const auto& p : m.store.all()) dump(p.name, p.value);
    if (!m.marginalPrior.empty()) dump("prior.marginal", m.marginalPrior);
}

}  // namespace csm::io
