#include "rfm/filter_precond.hpp"

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {

FilteredSystem::FilteredSystem(const GlobalSystem& source, double sigma, std::vector<FilteredBlock> blocks)
    : source_(&source), sigma_(sigma), blocks_(std::move(blocks)) {
  if (blocks_.size() != source.subdomains()) throw Error(ErrorCode::dimension_mismatch, "filtered block count");
  reduced_cols_ = 0;
  for (auto& b : blocks_) {
    b.reduced_offset = reduced_cols_;
    reduced_cols_ += b.rank();
  }
}

double FilteredSystem::drop_fraction() const {
  const auto total = static_cast<double>(source_->cols());
  return total == 0.0 ? 0.0 : 1.0 - static_cast<double>(reduced_cols_) / total;
}

std::vector<std::size_t> FilteredSystem::kept_columns() const {
  std::vector<std::size_t> out;
  out.reserve(reduced_cols_);
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const std::size_t offset = source_->matrix.block(j).col_offset;
    for (const std::size_t k : blocks_[j].kept) out.push_back(offset + k);
  }
  return out;
}

std::string FilteredSystem::summary_json() const {
  nlohmann::json doc;
  doc["sigma"] = sigma_;
  doc["drop_fraction"] = drop_fraction();
  doc["drop_pct"] = 100.0 * drop_fraction();
  doc["columns"] = source_->cols();
  doc["kept_columns"] = reduced_cols_;
  std::vector<std::size_t> ranks;
  for (const auto& b : blocks_) ranks.push_back(b.rank());
  doc["block_ranks"] = ranks;
  return doc.dump();
}

FilteredSystem filter(const GlobalSystem& sys, double sigma) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::invalid_input, "sigma must be non-negative");
  const auto& src = sys.matrix.blocks();
  std::vector<FilteredBlock> blocks(src.size());
  parallel_for(src.size(), [&](std::size_t j) {
    PivotedQR qr = qr_column_pivot(src[j].values, sigma);
    blocks[j].kept = std::move(qr.kept);
    blocks[j].dropped = std::move(qr.dropped);
    blocks[j].q = std::move(qr.q);
    blocks[j].r = std::move(qr.r_factor);
  });
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    if (blocks[j].rank() == 0) {
      throw Error(ErrorCode::degenerate_subdomain, "subdomain " + std::to_string(j) + " keeps no columns");
    }
  }
  return FilteredSystem(sys, sigma, std::move(blocks));
}

PreconditionedOperator::PreconditionedOperator(const FilteredSystem& fs) {
  const auto& src = fs.source().matrix.blocks();
  std::vector<MatrixBlock> blocks(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) {
    blocks[j].rows = src[j].rows;
    blocks[j].col_offset = fs.block(j).reduced_offset;
    blocks[j].values = fs.block(j).q;
  }
  matrix_ = BlockMatrix(fs.source().rows(), fs.reduced_cols(), std::move(blocks));
}

PreconditionedOperator precondition(const FilteredSystem& fs) { return PreconditionedOperator(fs); }

BlockMatrix filtered_matrix(const FilteredSystem& fs) {
  const auto& src = fs.source().matrix.blocks();
  std::vector<MatrixBlock> blocks(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) {
    const FilteredBlock& fb = fs.block(j);
    blocks[j].rows = src[j].rows;
    blocks[j].col_offset = fb.reduced_offset;
    blocks[j].values.resize(src[j].values.rows(), static_cast<Eigen::Index>(fb.rank()));
    for (std::size_t c = 0; c < fb.rank(); ++c) {
      blocks[j].values.col(static_cast<Eigen::Index>(c)) = src[j].values.col(static_cast<Eigen::Index>(fb.kept[c]));
    }
  }
  return BlockMatrix(fs.source().rows(), fs.reduced_cols(), std::move(blocks));
}

Vector recover_solution(const FilteredSystem& fs, const Vector& y) {
  if (static_cast<std::size_t>(y.size()) != fs.reduced_cols()) {
    throw Error(ErrorCode::dimension_mismatch, "recover_solution: y has the wrong length");
  }
  const GlobalSystem& sys = fs.source();
  Vector a = Vector::Zero(static_cast<Eigen::Index>(sys.cols()));
  for (std::size_t j = 0; j < fs.blocks().size(); ++j) {
    const FilteredBlock& fb = fs.block(j);
    const Vector local = back_substitute(
        fb.r, y.segment(static_cast<Eigen::Index>(fb.reduced_offset), static_cast<Eigen::Index>(fb.rank())));
    const std::size_t offset = sys.matrix.block(j).col_offset;
    for (std::size_t c = 0; c < fb.rank(); ++c) a(static_cast<Eigen::Index>(offset + fb.kept[c])) = local(static_cast<Eigen::Index>(c));
  }
  return a;
}

}  // namespace rfm
