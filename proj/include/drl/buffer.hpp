#ifndef DRL_BUFFER_HPP_
#define DRL_BUFFER_HPP_

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drl/nn.hpp"
#include "drl/rng.hpp"

namespace drl {

struct FieldSpec {
  std::string name;
  int dim = 1;

  bool operator==(const FieldSpec&) const = default;
};

// One keyed record: field name -> values (size = field dim).
using Row = std::map<std::string, Vector, std::less<>>;

// Columnar batch: one matrix (rows x dim) per field, rows aligned across fields.
class Batch {
 public:
  Batch() = default;
  Batch(std::vector<FieldSpec> fields, Eigen::Index rows);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  Eigen::Index size() const { return rows_; }
  bool empty() const { return rows_ == 0; }
  bool has(std::string_view name) const;

  Matrix& operator[](std::string_view name);
  const Matrix& operator[](std::string_view name) const;

  // Adds (or replaces) a column; its row count must match.
  void set(const std::string& name, Matrix column);

  Batch gather(std::span<const Eigen::Index> indices) const;
  Row row(Eigen::Index i) const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<FieldSpec> fields_;
  std::vector<Matrix> columns_;
  Eigen::Index rows_ = 0;
};

class RingBuffer;

// Per-environment append-only staging lists.
class StagingBuffer {
 public:
  StagingBuffer(std::vector<FieldSpec> fields, int n_envs);

  const std::vector<FieldSpec>& fields() const { return fields_; }
  int n_envs() const { return static_cast<int>(slots_.size()); }
  int size(int env) const;
  int total() const;

  void store(int env, const Row& row);

  // Mutable view of one staged value block.
  std::span<double> value(int env, int row, std::string_view field);

  // Moves every staged row into `dest`, env-major, and clears staging.
  int collect(RingBuffer& dest);

  // Moves the first counts[e] rows of each env slot into `dest`, env-major,
  // keeping the remaining rows staged.
  int collect_prefix(RingBuffer& dest, std::span<const int> counts);

  void clear();

 private:
  struct Slot {
    std::vector<std::vector<double>> columns;  // per field, row-major
    int rows = 0;
  };

  std::size_t index_of(std::string_view name) const;
  void check_env(int env) const;

  std::vector<FieldSpec> fields_;
  std::vector<Slot> slots_;
};

// Fixed-capacity keyed memory. Inserting past capacity overwrites the oldest
// rows. Row i (0 <= i < size()) denotes the i-th oldest valid row.
class RingBuffer {
 public:
  RingBuffer(int capacity, std::vector<FieldSpec> fields);

  int capacity() const { return capacity_; }
  int size() const { return count_; }
  const std::vector<FieldSpec>& fields() const { return fields_; }

  void insert(const Batch& rows);
  void insert(const Row& row);

  // Uniform with replacement over the valid rows.
  Batch sample(int batch_size, Rng& rng) const;

  // All valid rows oldest-first, without clearing.
  Batch contents() const;

  // All valid rows oldest-first; the buffer is left empty.
  Batch drain_all();

  void clear();

 private:
  int physical(int logical) const { return (head_ + logical) % capacity_; }
  Batch gather_logical(std::span<const Eigen::Index> logical) const;

  int capacity_;
  std::vector<FieldSpec> fields_;
  std::vector<Matrix> storage_;
  int head_ = 0;  // physical index of the oldest row
  int count_ = 0;
};

}  // namespace drl

#endif  // DRL_BUFFER_HPP_
