#pragma once

// Binary layout (little-endian):
//   magic "SHGLFLD1" | u32 d | i64 eps_num | i64 eps_den | u8 kind | u8 hermitian
//   | i32 cutoff[d] | (f64 re, f64 im) * size, row-major with axis 0 slowest.

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <mutex>
#include <string>
#include <thread>

#include "shgl/lattice.hpp"

namespace shgl {

using Field = SpectralField<double>;

class FieldIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_field(std::ostream& os, const Field& f);
Field read_field(std::istream& is);

void save_field(const std::filesystem::path& path, const Field& f);
Field load_field(const std::filesystem::path& path);

/// One row per lattice point: k_1..k_d, re, im with round-trip precision.
void write_field_csv(std::ostream& os, const Field& f);

/// Streams snapshots to `<dir>/<stem>_<step>.fld` from a worker thread and
/// keeps `<dir>/<stem>.index` (step, time, file) in snapshot order. push()
/// blocks only when `capacity` snapshots are already queued.
class TrajectoryWriter {
 public:
  TrajectoryWriter(std::filesystem::path dir, std::string stem, std::size_t capacity = 16);
  ~TrajectoryWriter();
  TrajectoryWriter(const TrajectoryWriter&) = delete;
  TrajectoryWriter& operator=(const TrajectoryWriter&) = delete;

  void push(int step, double time, Field f);
  /// Drains the queue, joins the worker and rethrows any write error.
  void close();

  const std::vector<std::filesystem::path>& files() const { return files_; }
  std::filesystem::path index_path() const { return dir_ / (stem_ + ".index"); }

 private:
  struct Item {
    int step;
    double time;
    Field field;
  };
  void run();

  std::filesystem::path dir_;
  std::string stem_;
  std::size_t capacity_;
  std::deque<Item> queue_;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
  bool closing_ = false;
  bool closed_ = false;
  std::exception_ptr error_;
  std::vector<std::filesystem::path> files_;
  std::ofstream index_;
  std::thread worker_;
};

}  // namespace shgl
