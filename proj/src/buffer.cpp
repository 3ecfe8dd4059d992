#include "drl/buffer.hpp"

#include <algorithm>
#include <set>

#include "drl/error.hpp"

namespace drl {
namespace {

void check_unique(const std::vector<FieldSpec>& fields) {
  std::set<std::string, std::less<>> seen;
  for (const auto& f : fields) {
    if (f.dim < 1) throw ShapeError("field '" + f.name + "' must have dim >= 1");
    if (!seen.insert(f.name).second) throw ShapeError("duplicate field '" + f.name + "'");
  }
}

}  // namespace

Batch::Batch(std::vector<FieldSpec> fields, Eigen::Index rows) : fields_(std::move(fields)), rows_(rows) {
  check_unique(fields_);
  for (const auto& f : fields_) columns_.push_back(Matrix::Zero(rows, f.dim));
}

std::size_t Batch::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  throw ShapeError("batch has no field '" + std::string(name) + "'");
}

bool Batch::has(std::string_view name) const {
  return std::any_of(fields_.begin(), fields_.end(), [&](const FieldSpec& f) { return f.name == name; });
}

Matrix& Batch::operator[](std::string_view name) { return columns_[index_of(name)]; }
const Matrix& Batch::operator[](std::string_view name) const { return columns_[index_of(name)]; }

void Batch::set(const std::string& name, Matrix column) {
  if (!fields_.empty() && column.rows() != rows_) throw ShapeError("column '" + name + "' has wrong row count");
  if (fields_.empty()) rows_ = column.rows();
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) {
      fields_[i].dim = static_cast<int>(column.cols());
      columns_[i] = std::move(column);
      return;
    }
  }
  fields_.push_back({name, static_cast<int>(column.cols())});
  columns_.push_back(std::move(column));
}

Batch Batch::gather(std::span<const Eigen::Index> indices) const {
  Batch out(fields_, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t f = 0; f < fields_.size(); ++f)
    for (std::size_t r = 0; r < indices.size(); ++r)
      out.columns_[f].row(static_cast<Eigen::Index>(r)) = columns_[f].row(indices[r]);
  return out;
}

Row Batch::row(Eigen::Index i) const {
  Row r;
  for (std::size_t f = 0; f < fields_.size(); ++f) r[fields_[f].name] = columns_[f].row(i).transpose();
  return r;
}

StagingBuffer::StagingBuffer(std::vector<FieldSpec> fields, int n_envs) : fields_(std::move(fields)) {
  check_unique(fields_);
  if (n_envs < 1) throw ShapeError("staging buffer needs n_envs >= 1");
  slots_.resize(n_envs);
  for (auto& s : slots_) s.columns.resize(fields_.size());
}

std::size_t StagingBuffer::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < fields_.size(); ++i)
    if (fields_[i].name == name) return i;
  throw ShapeError("staging buffer has no field '" + std::string(name) + "'");
}

void StagingBuffer::check_env(int env) const {
  if (env < 0 || env >= n_envs()) throw ShapeError("env index " + std::to_string(env) + " out of range");
}

int StagingBuffer::size(int env) const {
  check_env(env);
  return slots_[env].rows;
}

int StagingBuffer::total() const {
  int n = 0;
  for (const auto& s : slots_) n += s.rows;
  return n;
}

void StagingBuffer::store(int env, const Row& row) {
  check_env(env);
  for (const auto& f : fields_) {
    auto it = row.find(f.name);
    if (it == row.end()) throw ShapeError("row is missing field '" + f.name + "'");
    if (it->second.size() != f.dim)
      throw ShapeError("field '" + f.name + "' expects dim " + std::to_string(f.dim) + ", got " +
                       std::to_string(it->second.size()));
  }
  Slot& slot = slots_[env];
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    const Vector& v = row.find(fields_[i].name)->second;
    slot.columns[i].insert(slot.columns[i].end(), v.data(), v.data() + v.size());
  }
  slot.rows += 1;
}

std::span<double> StagingBuffer::value(int env, int row, std::string_view field) {
  check_env(env);
  Slot& slot = slots_[env];
  if (row < 0 || row >= slot.rows) throw ShapeError("staged row out of range");
  const std::size_t f = index_of(field);
  const int dim = fields_[f].dim;
  return {slot.columns[f].data() + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim)};
}

int StagingBuffer::collect(RingBuffer& dest) {
  std::vector<int> counts;
  for (const auto& s : slots_) counts.push_back(s.rows);
  return collect_prefix(dest, counts);
}

int StagingBuffer::collect_prefix(RingBuffer& dest, std::span<const int> counts) {
  if (dest.fields() != fields_) throw ShapeError("staging/ring field specs differ");
  if (static_cast<int>(counts.size()) != n_envs()) throw ShapeError("collect_prefix needs one count per env");
  int total_rows = 0;
  for (int e = 0; e < n_envs(); ++e) {
    if (counts[e] < 0 || counts[e] > slots_[e].rows) throw ShapeError("collect_prefix count out of range");
    total_rows += counts[e];
  }
  if (total_rows == 0) return 0;
  Batch batch(fields_, total_rows);
  Eigen::Index r = 0;
  for (int e = 0; e < n_envs(); ++e) {
    Slot& slot = slots_[e];
    for (std::size_t f = 0; f < fields_.size(); ++f) {
      const int dim = fields_[f].dim;
      Matrix& col = batch[fields_[f].name];
      for (int i = 0; i < counts[e]; ++i)
        for (int d = 0; d < dim; ++d) col(r + i, d) = slot.columns[f][static_cast<std::size_t>(i) * dim + d];
      slot.columns[f].erase(slot.columns[f].begin(), slot.columns[f].begin() + static_cast<std::ptrdiff_t>(counts[e]) * dim);
    }
    slot.rows -= counts[e];
    r += counts[e];
  }
  dest.insert(batch);
  return total_rows;
}

void StagingBuffer::clear() {
  for (auto& s : slots_) {
    for (auto& c : s.columns) c.clear();
    s.rows = 0;
  }
}

RingBuffer::RingBuffer(int capacity, std::vector<FieldSpec> fields) : capacity_(capacity), fields_(std::move(fields)) {
  if (capacity < 1) throw ShapeError("ring buffer capacity must be >= 1");
  check_unique(fields_);
  for (const auto& f : fields_) storage_.push_back(Matrix::Zero(capacity, f.dim));
}

void RingBuffer::insert(const Batch& rows) {
  for (const auto& f : fields_) {
    if (!rows.has(f.name)) throw ShapeError("inserted batch is missing field '" + f.name + "'");
    if (rows[f.name].cols() != f.dim) throw ShapeError("field '" + f.name + "' dim mismatch on insert");
  }
  const int n = static_cast<int>(rows.size());
  // Only the newest `capacity` rows can survive.
  const int skip = std::max(0, n - capacity_);
  for (int i = skip; i < n; ++i) {
    int slot;
    if (count_ < capacity_) {
      slot = physical(count_);
      ++count_;
    } else {
      slot = head_;
      head_ = (head_ + 1) % capacity_;
    }
    for (std::size_t f = 0; f < fields_.size(); ++f) storage_[f].row(slot) = rows[fields_[f].name].row(i);
  }
}

void RingBuffer::insert(const Row& row) {
  Batch b(fields_, 1);
  for (const auto& f : fields_) {
    auto it = row.find(f.name);
    if (it == row.end()) throw ShapeError("row is missing field '" + f.name + "'");
    if (it->second.size() != f.dim) throw ShapeError("field '" + f.name + "' dim mismatch on insert");
    b[f.name].row(0) = it->second.transpose();
  }
  insert(b);
}

Batch RingBuffer::gather_logical(std::span<const Eigen::Index> logical) const {
  Batch out(fields_, static_cast<Eigen::Index>(logical.size()));
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    Matrix& col = out[fields_[f].name];
    for (std::size_t r = 0; r < logical.size(); ++r)
      col.row(static_cast<Eigen::Index>(r)) = storage_[f].row(physical(static_cast<int>(logical[r])));
  }
  return out;
}

Batch RingBuffer::sample(int batch_size, Rng& rng) const {
  if (batch_size < 0) throw ShapeError("negative batch size");
  if (count_ < batch_size || count_ == 0)
    throw ShapeError("ring buffer holds " + std::to_string(count_) + " rows, cannot sample " +
                     std::to_string(batch_size));
  std::uniform_int_distribution<int> pick(0, count_ - 1);
  std::vector<Eigen::Index> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return gather_logical(idx);
}

Batch RingBuffer::contents() const {
  std::vector<Eigen::Index> idx(count_);
  for (int i = 0; i < count_; ++i) idx[i] = i;
  return gather_logical(idx);
}

Batch RingBuffer::drain_all() {
  Batch out = contents();
  clear();
  return out;
}

void RingBuffer::clear() {
  head_ = 0;
  count_ = 0;
}

}  // namespace drl
