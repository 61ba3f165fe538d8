#include "mek/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <type_traits>

#include "mek/error.hpp"

namespace mek {
namespace {

static_assert(std::endian::native == std::endian::little, "model files are written in host byte order");

constexpr char kMagic[4] = {'M', 'E', 'K', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kKnn = 1;
constexpr std::uint8_t kSvm = 2;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void put_array(const std::vector<T>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string origin) : in_(in), origin_(std::move(origin)) {}

  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string get_string() {
    const auto len = get<std::uint32_t>();
    if (len > (1u << 20)) fail("implausible string length");
    std::string s(len, '\0');
    in_.read(s.data(), len);
    check();
    return s;
  }
  template <typename T>
  std::vector<T> get_array(std::uint64_t count) {
    if (count > (std::uint64_t{1} << 34) / sizeof(T)) fail("implausible array length");
    std::vector<T> v(count);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(T)));
    check();
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::BadModelFile, origin_ + ": " + what); }

 private:
  void check() const {
    if (!in_) fail("truncated file");
  }
  std::istream& in_;
  std::string origin_;
};

void write_names(Writer& w, const std::vector<std::string>& names) {
  w.put(static_cast<std::uint32_t>(names.size()));
  for (const auto& n : names) w.put_string(n);
}

std::vector<std::string> read_names(Reader& r) {
  const auto count = r.get<std::uint32_t>();
  if (count == 0 || count > 4096) r.fail("bad class count");
  std::vector<std::string> names(count);
  for (auto& n : names) n = r.get_string();
  return names;
}

}  // namespace

void save_model(const ClassicalModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, 4);
  w.put(kVersion);
  if (const auto* knn = std::get_if<KnnModel>(&model)) {
    w.put(kKnn);
    write_names(w, knn->train.class_names);
    w.put(static_cast<std::int32_t>(knn->k));
    w.put(static_cast<std::uint8_t>(knn->metric.kind));
    w.put(knn->metric.p);
    w.put(static_cast<std::uint64_t>(knn->train.size()));
    w.put(static_cast<std::uint64_t>(knn->train.dim));
    w.put_array(knn->train.features);
    std::vector<std::int32_t> labels(knn->train.labels.begin(), knn->train.labels.end());
    w.put_array(labels);
  } else {
    const auto& svm = std::get<SvmModel>(model);
    w.put(kSvm);
    write_names(w, svm.class_names);
    w.put(static_cast<std::uint8_t>(svm.kernel.kind));
    w.put(svm.kernel.gamma);
    w.put(static_cast<std::int32_t>(svm.kernel.degree));
    w.put(svm.kernel.coef0);
    w.put(svm.kernel.sigma);
    w.put(svm.C);
    w.put(static_cast<std::uint64_t>(svm.dim));
    w.put(static_cast<std::uint64_t>(svm.support_count()));
    w.put_array(svm.support_vectors);
    for (std::size_t c = 0; c < svm.class_names.size(); ++c) {
      w.put(svm.bias[c]);
      w.put_array(svm.coef[c]);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

namespace {

void expect_end(std::istream& in, const Reader& r) {
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after model payload");
}

}  // namespace

ClassicalModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Reader r(in, path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) r.fail("missing MEK1 header");
  if (const auto version = r.get<std::uint32_t>(); version != kVersion)
    r.fail("unsupported format version " + std::to_string(version));
  const auto kind = r.get<std::uint8_t>();
  if (kind == kKnn) {
    KnnModel m;
    m.train.class_names = read_names(r);
    m.k = r.get<std::int32_t>();
    const auto metric = r.get<std::uint8_t>();
    if (metric > static_cast<std::uint8_t>(DistanceMetric::Kind::Chebyshev)) r.fail("unknown metric");
    m.metric.kind = static_cast<DistanceMetric::Kind>(metric);
    m.metric.p = r.get<double>();
    const auto n = r.get<std::uint64_t>();
    m.train.dim = r.get<std::uint64_t>();
    m.train.features = r.get_array<double>(n * m.train.dim);
    const auto labels = r.get_array<std::int32_t>(n);
    m.train.labels.assign(labels.begin(), labels.end());
    try {
      m.train.validate();
      m.metric.validate();
    } catch (const Error& e) {
      r.fail(e.what());
    }
    if (m.k < 1 || static_cast<std::uint64_t>(m.k) > n) r.fail("k out of range");
    expect_end(in, r);
    return m;
  }
  if (kind == kSvm) {
    SvmModel m;
    m.class_names = read_names(r);
    const auto kernel = r.get<std::uint8_t>();
    if (kernel > static_cast<std::uint8_t>(KernelSpec::Kind::Gaussian)) r.fail("unknown kernel");
    m.kernel.kind = static_cast<KernelSpec::Kind>(kernel);
    m.kernel.gamma = r.get<double>();
    m.kernel.degree = r.get<std::int32_t>();
    m.kernel.coef0 = r.get<double>();
    m.kernel.sigma = r.get<double>();
    m.C = r.get<double>();
    m.dim = r.get<std::uint64_t>();
    const auto nsv = r.get<std::uint64_t>();
    if (m.dim == 0) r.fail("zero feature dimension");
    m.support_vectors = r.get_array<double>(nsv * m.dim);
    for (std::size_t c = 0; c < m.class_names.size(); ++c) {
      m.bias.push_back(r.get<double>());
      m.coef.push_back(r.get_array<double>(nsv));
    }
    expect_end(in, r);
    return m;
  }
  r.fail("unknown model kind " + std::to_string(kind));
}

const std::vector<std::string>& class_names(const ClassicalModel& model) {
  return std::visit(
      [](const auto& m) -> const std::vector<std::string>& {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, KnnModel>) {
          return m.train.class_names;
        } else {
          return m.class_names;
        }
      },
      model);
}

std::size_t feature_dim(const ClassicalModel& model) {
  if (const auto* knn = std::get_if<KnnModel>(&model)) return knn->train.dim;
  return std::get<SvmModel>(model).dim;
}

std::vector<double> predict_proba(const ClassicalModel& model, std::span<const double> x) {
  if (const auto* knn = std::get_if<KnnModel>(&model)) return knn_predict_proba(*knn, x);
  return svm_predict_proba(std::get<SvmModel>(model), x);
}

}  // namespace mek
