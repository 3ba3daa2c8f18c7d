#include "hinormer/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace hinormer {

namespace {

constexpr char kMagic[8] = {'H', 'N', 'R', 'M', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary)
    {
        if (!out_) throw std::runtime_error("cannot write checkpoint " + path.string());
    }
    template <typename T>
    void pod(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
    void str(const std::string& s)
    {
        pod<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void matrix(const Eigen::MatrixXd& m)
    {
        pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
        pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) pod(m(i, j));
    }
    void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
    void finish()
    {
        out_.flush();
        if (!out_) throw std::runtime_error("checkpoint write failed");
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path.string())
    {
        if (!in_) throw std::runtime_error("cannot open checkpoint " + path_);
    }
    template <typename T>
    T pod()
    {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!in_) throw std::runtime_error(path_ + ": truncated checkpoint");
        return v;
    }
    std::uint64_t length(std::uint64_t limit)
    {
        const auto n = pod<std::uint64_t>();
        if (n > limit) throw std::runtime_error(path_ + ": corrupt length field");
        return n;
    }
    std::string str()
    {
        std::string s(length(1u << 30), '\0');
        in_.read(s.data(), static_cast<std::streamsize>(s.size()));
        if (!in_) throw std::runtime_error(path_ + ": truncated checkpoint");
        return s;
    }
    Eigen::MatrixXd matrix()
    {
        const auto r = length(1u << 28), c = length(1u << 28);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = pod<double>();
        return m;
    }
    void raw(char* p, std::size_t n)
    {
        in_.read(p, static_cast<std::streamsize>(n));
        if (!in_) throw std::runtime_error(path_ + ": truncated checkpoint");
    }
    const std::string& path() const { return path_; }

private:
    std::ifstream in_;
    std::string path_;
};

} // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck)
{
    Writer w(path);
    w.raw(kMagic, sizeof kMagic);
    w.pod(Checkpoint::kVersion);
    w.str(ck.config_text);
    w.pod(ck.dataset_checksum);
    w.pod<std::int32_t>(ck.epoch);
    w.pod<std::int32_t>(ck.best_epoch);
    w.pod(ck.best_metric);
    w.pod(ck.lr);
    w.pod<std::uint64_t>(ck.params.size());
    for (const NamedTensor& t : ck.params) {
        w.str(t.name);
        w.matrix(t.value);
    }
    w.pod<std::int64_t>(ck.adam.step);
    w.pod<std::uint64_t>(ck.adam.names.size());
    for (std::size_t i = 0; i < ck.adam.names.size(); ++i) {
        w.str(ck.adam.names[i]);
        w.matrix(ck.adam.m[i]);
        w.matrix(ck.adam.v[i]);
    }
    w.finish();
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    Reader r(path);
    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw std::runtime_error(r.path() + ": not a checkpoint file");
    const auto version = r.pod<std::uint32_t>();
    if (version != Checkpoint::kVersion)
        throw std::runtime_error(r.path() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config_text = r.str();
    ck.dataset_checksum = r.pod<std::uint64_t>();
    ck.epoch = r.pod<std::int32_t>();
    ck.best_epoch = r.pod<std::int32_t>();
    ck.best_metric = r.pod<double>();
    ck.lr = r.pod<double>();
    const auto n = r.length(1u << 20);
    for (std::uint64_t i = 0; i < n; ++i) {
        NamedTensor t;
        t.name = r.str();
        t.value = r.matrix();
        ck.params.push_back(std::move(t));
    }
    ck.adam.step = r.pod<std::int64_t>();
    const auto k = r.length(1u << 20);
    for (std::uint64_t i = 0; i < k; ++i) {
        ck.adam.names.push_back(r.str());
        ck.adam.m.push_back(r.matrix());
        ck.adam.v.push_back(r.matrix());
    }
    return ck;
}

} // namespace hinormer
