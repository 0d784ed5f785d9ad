#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "synthdet/detector.hpp"
#include "synthdet/image.hpp"
#include "synthdet/swapper.hpp"

namespace synthdet {

// One accuracy measurement: a trained model tested against one swap backend
// on one dataset. A cell that could not be computed carries the error text
// instead of a result; the rest of the matrix is unaffected.
struct EvalCell {
  std::string train_type;
  std::string train_swap_backend;
  std::string test_swap_backend;
  std::string dataset_id;
  double accuracy = 0.0;
  int n_examples = 0;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct EvalMatrix {
  std::vector<EvalCell> cells;
  nlohmann::json manifest = nlohmann::json::object();
};

// All images enter as the real class; consecutive-pair swaps (the training
// pairing scheme) enter as the fake class. Example ids are
// "<prefix>real-NNNN" / "<prefix>fake-NNNN". When profiles are supplied
// (one per image) each real example carries its own profile and each fake
// carries the identity source's, since the swapped face is that person's.
std::vector<LabeledExample> build_test_set(
    const std::vector<Image>& images, const SwapBackend& backend,
    const std::string& id_prefix = "",
    const std::vector<DemographicProfile>* profiles = nullptr);

// Fraction of positions where prediction == truth.
double accuracy(const std::vector<Label>& predictions,
                const std::vector<Label>& truth);

// Deterministic argmax decisions for every example.
std::vector<Label> predict_labels(const DetectorModel& model,
                                  const std::vector<LabeledExample>& examples,
                                  Exec exec = Exec::Parallel);

double evaluate_accuracy(const DetectorModel& model,
                         const std::vector<LabeledExample>& examples,
                         Exec exec = Exec::Parallel);

// One cell per (model, test backend, dataset). Cells are independent;
// failures (resolution mismatch, backend errors) are recorded in-cell and
// the matrix is still returned. Models are keyed by a caller-chosen name
// used only for deterministic ordering; the cell key is
// (train_type, train_swap, test_swap, dataset) and must be unique.
EvalMatrix cross_modal_matrix(
    const std::map<std::string, const DetectorModel*>& models,
    const std::vector<const SwapBackend*>& backends,
    const std::map<std::string, std::vector<Image>>& datasets,
    Exec exec = Exec::Parallel);

// CSV with columns exactly: train_type,train_swap,test_swap,dataset,
// accuracy,n_examples. Failed cells are omitted here; the JSON form carries
// them under "failures".
std::string eval_matrix_csv(const EvalMatrix& matrix);
nlohmann::json eval_matrix_json(const EvalMatrix& matrix);

}  // namespace synthdet
