#include "wsr/search.hpp"

#include <algorithm>
#include <limits>

#include "wsr/error.hpp"

namespace wsr {

SlideIndex::SlideIndex(std::vector<IndexEntry> entries) : entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.record.wsi_id < b.record.wsi_id; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.record.wsi_id != e.bunch.wsi_id) {
      throw DataError("index: record '" + e.record.wsi_id + "' carries bunch of '" + e.bunch.wsi_id + "'");
    }
    if (i > 0 && entries_[i - 1].record.wsi_id == e.record.wsi_id)
      throw DataError("index: duplicate wsi_id '" + e.record.wsi_id + "'");
    e.bunch.validate();
    if (i == 0) nbits_ = e.bunch.nbits();
    if (e.bunch.nbits() != nbits_) {
      throw DataError("index: slide '" + e.record.wsi_id + "' has " + std::to_string(e.bunch.nbits()) +
                      "-bit barcodes, index uses " + std::to_string(nbits_));
    }
    organs_[e.record.organ].push_back(i);
    by_id_.emplace(e.record.wsi_id, i);
  }
}

const IndexEntry* SlideIndex::find(const std::string& wsi_id) const {
  auto it = by_id_.find(wsi_id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const IndexEntry& SlideIndex::at(const std::string& wsi_id) const {
  if (const auto* e = find(wsi_id)) return *e;
  throw DataError("index: no slide '" + wsi_id + "'");
}

void SlideIndex::set_slide_vectors(std::map<std::string, Embedding> vectors) {
  Eigen::Index dim = -1;
  for (const auto& [id, v] : vectors) {
    if (!find(id)) throw DataError("slide vectors: '" + id + "' is not in the index");
    if (dim < 0) dim = v.size();
    if (v.size() != dim) throw DataError("slide vectors: '" + id + "' has dimension " + std::to_string(v.size()));
    if (!v.allFinite()) throw DataError("slide vectors: '" + id + "' has non-finite components");
  }
  slide_vectors_ = std::move(vectors);
}

SlideIndex build_index(const DatasetManifest& manifest, const EmbeddingStore& embeddings) {
  std::vector<IndexEntry> entries;
  entries.reserve(manifest.records.size());
  for (const auto& rec : manifest.records) {
    const auto& slide = embeddings.at(rec.wsi_id);
    if (slide.size() == 0) throw DataError("index: slide '" + rec.wsi_id + "' has no patch embeddings");
    entries.push_back({rec, barcode_slide(rec.wsi_id, slide)});
  }
  return SlideIndex(std::move(entries));
}

double wsi_distance(const BunchOfBarcodes& query, const BunchOfBarcodes& candidate) {
  if (query.barcodes.empty() || candidate.barcodes.empty())
    throw DataError("wsi_distance: empty bunch ('" + (query.barcodes.empty() ? query.wsi_id : candidate.wsi_id) + "')");
  if (query.nbits() != candidate.nbits()) throw DataError("wsi_distance: barcode length mismatch");

  std::vector<std::uint32_t> minima;
  minima.reserve(query.barcodes.size());
  for (const auto& q : query.barcodes) {
    std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
    for (const auto& c : candidate.barcodes) best = std::min(best, hamming(q, c));
    minima.push_back(best);
  }
  const std::size_t n = minima.size();
  const auto mid = minima.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(minima.begin(), mid, minima.end());
  if (n % 2 == 1) return *mid;
  const auto lower = *std::max_element(minima.begin(), mid);
  return 0.5 * (static_cast<double>(lower) + static_cast<double>(*mid));
}

namespace {

std::vector<std::size_t> candidate_pool(const SlideIndex& index, const SlideRecord& query, const EvalConfig& cfg) {
  std::vector<std::size_t> pool;
  auto consider = [&](std::size_t i) {
    const auto& r = index.entries()[i].record;
    if (r.wsi_id == query.wsi_id) return;
    if (cfg.exclude_same_patient && r.patient_id == query.patient_id) return;
    pool.push_back(i);
  };
  if (cfg.within_organ) {
    auto it = index.organs().find(query.organ);
    if (it != index.organs().end()) {
      for (auto i : it->second) consider(i);
    }
  } else {
    for (std::size_t i = 0; i < index.size(); ++i) consider(i);
  }
  if (pool.empty()) {
    throw DataError("search: empty candidate pool for slide '" + query.wsi_id + "' in organ '" + query.organ + "'");
  }
  return pool;
}

RetrievalResult top_k(const SlideIndex& index, const std::vector<std::size_t>& pool, const std::vector<double>& dist,
                      int k) {
  std::vector<std::size_t> order(pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto less = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return index.entries()[pool[a]].record.wsi_id < index.entries()[pool[b]].record.wsi_id;
  };
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), less);
  RetrievalResult res;
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& r = index.entries()[pool[order[i]]].record;
    res.ranked.push_back({r.wsi_id, dist[order[i]], r.primary_diagnosis});
  }
  return res;
}

}  // namespace

RetrievalResult search(const SlideIndex& index, const SlideRecord& query_record, const BunchOfBarcodes& query,
                       int k, const EvalConfig& cfg) {
  if (k < 1) throw DataError("search: k must be >= 1");
  const auto pool = candidate_pool(index, query_record, cfg);
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) dist[i] = wsi_distance(query, index.entries()[pool[i]].bunch);
  return top_k(index, pool, dist, k);
}

std::string majority_label(const RetrievalResult& result, int k) {
  if (result.ranked.empty()) throw DataError("majority_label: empty retrieval result");
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(k, 1)), result.ranked.size());
  // (label, count) in order of first appearance, so earlier entries win ties.
  std::vector<std::pair<const std::string*, int>> tally;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = result.ranked[i].primary_diagnosis;
    auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return *t.first == label; });
    if (it == tally.end()) {
      tally.emplace_back(&label, 1);
    } else {
      ++it->second;
    }
  }
  const auto* best = &tally.front();
  for (const auto& t : tally) {
    if (t.second > best->second) best = &t;
  }
  return *best->first;
}

RetrievalResult slide_vector_search(const SlideIndex& index, const SlideRecord& query_record, const Embedding& query,
                                    int k, const EvalConfig& cfg) {
  if (k < 1) throw DataError("slide_vector_search: k must be >= 1");
  if (!index.has_slide_vectors()) throw DataError("slide_vector_search: index has no slide-vector table");
  const auto pool = candidate_pool(index, query_record, cfg);
  std::vector<double> dist(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& id = index.entries()[pool[i]].record.wsi_id;
    auto it = index.slide_vectors().find(id);
    if (it == index.slide_vectors().end()) throw DataError("slide_vector_search: no slide vector for '" + id + "'");
    if (it->second.size() != query.size()) {
      throw DataError("slide_vector_search: query has dimension " + std::to_string(query.size()) + ", table has " +
                      std::to_string(it->second.size()));
    }
    dist[i] = cosine_distance(query, it->second);
  }
  return top_k(index, pool, dist, k);
}

}  // namespace wsr
