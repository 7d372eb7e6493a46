#ifndef WSR_SEARCH_HPP
#define WSR_SEARCH_HPP

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsr/barcode.hpp"
#include "wsr/core.hpp"
#include "wsr/embedding.hpp"

namespace wsr {

struct IndexEntry {
  SlideRecord record;
  BunchOfBarcodes bunch;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// Immutable searchable archive. Entries are kept sorted by wsi_id.
class SlideIndex {
 public:
  SlideIndex() = default;
  /// Throws DataError on duplicate wsi_id, a record/bunch id mismatch or
  /// barcodes of differing lengths.
  explicit SlideIndex(std::vector<IndexEntry> entries);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t nbits() const { return nbits_; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  const IndexEntry& at(const std::string& wsi_id) const;
  const IndexEntry* find(const std::string& wsi_id) const;

  /// Organ name -> positions in entries(), ascending.
  const std::map<std::string, std::vector<std::size_t>>& organs() const { return organs_; }

  /// Slide-level vectors for single-vector retrieval; all must share one
  /// dimension and belong to indexed slides.
  void set_slide_vectors(std::map<std::string, Embedding> vectors);
  bool has_slide_vectors() const { return !slide_vectors_.empty(); }
  const std::map<std::string, Embedding>& slide_vectors() const { return slide_vectors_; }

  friend bool operator==(const SlideIndex& a, const SlideIndex& b) {
    return a.entries_ == b.entries_ && a.nbits_ == b.nbits_;
  }

 private:
  std::vector<IndexEntry> entries_;
  std::map<std::string, std::vector<std::size_t>> organs_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, Embedding> slide_vectors_;
  std::size_t nbits_ = 0;
};

/// One entry per manifest record, barcoding every patch vector of that slide.
SlideIndex build_index(const DatasetManifest& manifest, const EmbeddingStore& embeddings);

struct RetrievalHit {
  std::string wsi_id;
  double distance = 0;
  std::string primary_diagnosis;

  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Ascending by (distance, wsi_id).
struct RetrievalResult {
  std::vector<RetrievalHit> ranked;
  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

/// Median over the query's barcodes of each one's minimum Hamming distance to
/// the candidate's barcodes; even counts average the two central minima.
/// Not symmetric: the query is always the first argument.
double wsi_distance(const BunchOfBarcodes& query, const BunchOfBarcodes& candidate);

/// Exhaustive top-k over the candidate pool: same organ when within_organ,
/// never the query's own wsi_id, and no slide of the query's patient when
/// exclude_same_patient. Returns fewer than k hits when the pool is small;
/// throws DataError when the pool is empty.
RetrievalResult search(const SlideIndex& index, const SlideRecord& query_record, const BunchOfBarcodes& query,
                       int k, const EvalConfig& cfg);

/// Most frequent label among the first k hits (all hits if fewer); ties go to
/// the label whose best-ranked hit comes first.
std::string majority_label(const RetrievalResult& result, int k);

/// 1 - cos(a, b). Throws DataError for zero-norm or mismatched inputs.
template <typename DerivedA, typename DerivedB>
double cosine_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw DataError("cosine: dimension mismatch");
  const double na = a.template cast<double>().norm();
  const double nb = b.template cast<double>().norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine: zero-norm vector");
  return 1.0 - a.template cast<double>().dot(b.template cast<double>()) / (na * nb);
}

/// Single-vector retrieval by ascending cosine distance, with the same pool
/// and tie rules as search().
RetrievalResult slide_vector_search(const SlideIndex& index, const SlideRecord& query_record, const Embedding& query,
                                    int k, const EvalConfig& cfg);

}  // namespace wsr

#endif  // WSR_SEARCH_HPP
