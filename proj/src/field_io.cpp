#include "shgl/field_io.hpp"

#include <array>
#include <cstring>
#include <fmt/format.h>
#include <istream>
#include <ostream>

namespace shgl {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'H', 'G', 'L', 'F', 'L', 'D', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FieldIoError("truncated field stream");
  return v;
}

}  // namespace

void write_field(std::ostream& os, const Field& f) {
  const auto& lat = f.lattice();
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(lat.dim()));
  put<std::int64_t>(os, 1);
  put<std::int64_t>(os, lat.n());
  put<std::uint8_t>(os, static_cast<std::uint8_t>(lat.kind()));
  put<std::uint8_t>(os, f.hermitian() ? 1 : 0);
  for (int m : lat.cutoff()) put<std::int32_t>(os, m);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    put<double>(os, f[i].real());
    put<double>(os, f[i].imag());
  }
  if (!os) throw FieldIoError("failed to write field");
}

Field read_field(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FieldIoError("not a field file (bad magic)");
  const auto d = get<std::uint32_t>(is);
  const auto num = get<std::int64_t>(is);
  const auto den = get<std::int64_t>(is);
  const auto kind = get<std::uint8_t>(is);
  const auto herm = get<std::uint8_t>(is);
  if (d < 1 || d > 8 || num != 1 || den < 2 || kind > 1) throw FieldIoError("corrupt field header");
  std::vector<int> cutoff(d);
  for (auto& m : cutoff) {
    m = get<std::int32_t>(is);
    if (m < 0) throw FieldIoError("corrupt field header");
  }
  LatticeSpec lat(static_cast<int>(den), cutoff, static_cast<LatticeKind>(kind));
  Field f(lat, herm != 0);
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    f[i] = {re, im};
  }
  return f;
}

void save_field(const std::filesystem::path& path, const Field& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FieldIoError("cannot open " + path.string());
  write_field(os, f);
}

Field load_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FieldIoError("cannot open " + path.string());
  return read_field(is);
}

void write_field_csv(std::ostream& os, const Field& f) {
  const auto& lat = f.lattice();
  for (int a = 0; a < lat.dim(); ++a) os << "k" << (a + 1) << ",";
  os << "re,im\n";
  std::vector<int> j(lat.dim());
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    lat.multi_index(i, j);
    for (int a = 0; a < lat.dim(); ++a) os << fmt::format("{},", lat.spacing() * j[a]);
    os << fmt::format("{},{}\n", f[i].real(), f[i].imag());
  }
}

TrajectoryWriter::TrajectoryWriter(std::filesystem::path dir, std::string stem, std::size_t capacity)
    : dir_(std::move(dir)), stem_(std::move(stem)), capacity_(std::max<std::size_t>(capacity, 1)) {
  std::filesystem::create_directories(dir_);
  index_.open(index_path());
  if (!index_) throw FieldIoError("cannot open " + index_path().string());
  index_ << "step,time,file\n";
  worker_ = std::thread([this] { run(); });
}

TrajectoryWriter::~TrajectoryWriter() {
  try {
    close();
  } catch (...) {
  }
}

void TrajectoryWriter::push(int step, double time, Field f) {
  std::unique_lock lock(mutex_);
  if (closing_) throw std::logic_error("push on a closed TrajectoryWriter");
  not_full_.wait(lock, [this] { return queue_.size() < capacity_ || error_; });
  if (error_) std::rethrow_exception(error_);
  queue_.push_back({step, time, std::move(f)});
  const auto name = fmt::format("{}_{:08d}.fld", stem_, step);
  files_.push_back(dir_ / name);
  not_empty_.notify_one();
}

void TrajectoryWriter::close() {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    closing_ = true;
  }
  not_empty_.notify_all();
  if (worker_.joinable()) worker_.join();
  closed_ = true;
  index_.close();
  if (error_) std::rethrow_exception(error_);
}

void TrajectoryWriter::run() {
  for (;;) {
    Item item;
    {
      std::unique_lock lock(mutex_);
      not_empty_.wait(lock, [this] { return !queue_.empty() || closing_; });
      if (queue_.empty()) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      not_full_.notify_one();
    }
    try {
      const auto name = fmt::format("{}_{:08d}.fld", stem_, item.step);
      save_field(dir_ / name, item.field);
      index_ << item.step << "," << fmt::format("{}", item.time) << "," << name << "\n";
    } catch (...) {
      std::lock_guard lock(mutex_);
      error_ = std::current_exception();
      not_full_.notify_all();
      return;
    }
  }
}

}  // namespace shgl
