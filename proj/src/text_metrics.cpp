#include "twr/text_metrics.hpp"

#include <stdexcept>

namespace twr {

double cosine(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

Matrix gather_rows(std::span<const int> ids, const Matrix& embeddings) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), embeddings.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= embeddings.rows()) {
      throw std::out_of_range("bow_embedding_scores: token id " + std::to_string(ids[i]) +
                              " outside the embedding table");
    }
    out.row(static_cast<Eigen::Index>(i)) = embeddings.row(ids[i]);
  }
  return out;
}

RowVector extreme(const Matrix& e) {
  RowVector out(e.cols());
  for (Eigen::Index k = 0; k < e.cols(); ++k) {
    Eigen::Index at = 0;
    e.col(k).cwiseAbs().maxCoeff(&at);
    out(k) = e(at, k);
  }
  return out;
}

}  // namespace

BowScores bow_embedding_scores(std::span<const int> response, std::span<const int> reference,
                               const Matrix& embeddings) {
  BowScores s;
  if (response.empty() || reference.empty()) return s;
  const Matrix hyp = gather_rows(response, embeddings);
  const Matrix ref = gather_rows(reference, embeddings);
  s.average = cosine(hyp.colwise().mean(), ref.colwise().mean());
  s.extreme = cosine(extreme(hyp), extreme(ref));
  double greedy = 0.0;
  for (Eigen::Index i = 0; i < hyp.rows(); ++i) {
    double best = -1.0;
    for (Eigen::Index j = 0; j < ref.rows(); ++j) {
      best = std::max(best, cosine(hyp.row(i), ref.row(j)));
    }
    greedy += best;
  }
  s.greedy = greedy / static_cast<double>(hyp.rows());
  return s;
}

}  // namespace twr
