#include "synthdet/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace synthdet {

namespace {

std::string indexed_id(const std::string& prefix, const char* kind, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%04d", kind, i);
  return prefix + buf;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::vector<LabeledExample> build_test_set(
    const std::vector<Image>& images, const SwapBackend& backend,
    const std::string& id_prefix,
    const std::vector<DemographicProfile>* profiles) {
  if (images.size() < 2)
    throw ValidationError("test set needs at least 2 images, got " +
                          std::to_string(images.size()));
  if (profiles && profiles->size() != images.size())
    throw ValidationError("profile count does not match image count");

  const std::vector<Image> fakes = pair_swap_images(images, backend);

  std::vector<LabeledExample> out;
  out.reserve(images.size() + fakes.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    LabeledExample ex;
    ex.image = images[i];
    ex.label = Label::Real;
    ex.id = indexed_id(id_prefix, "real", static_cast<int>(i));
    if (profiles) ex.profile = (*profiles)[i];
    out.push_back(std::move(ex));
  }
  for (std::size_t i = 0; i < fakes.size(); ++i) {
    LabeledExample ex;
    ex.image = fakes[i];
    ex.label = Label::Fake;
    ex.id = indexed_id(id_prefix, "fake", static_cast<int>(i));
    if (profiles) ex.profile = (*profiles)[i];  // identity source of pair (i, i+1)
    out.push_back(std::move(ex));
  }
  return out;
}

double accuracy(const std::vector<Label>& predictions,
                const std::vector<Label>& truth) {
  if (predictions.empty())
    throw ValidationError("accuracy over an empty prediction list");
  if (predictions.size() != truth.size())
    throw ValidationError("accuracy: " + std::to_string(predictions.size()) +
                          " predictions vs " + std::to_string(truth.size()) +
                          " truths");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::vector<Label> predict_labels(const DetectorModel& model,
                                  const std::vector<LabeledExample>& examples,
                                  Exec exec) {
  std::vector<Label> out(examples.size(), Label::Real);
  bool failed = false;
  std::string failure;
  const int n = static_cast<int>(examples.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = decide(predict(model, examples[i].image, exec));
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw ValidationError(failure);
  return out;
}

double evaluate_accuracy(const DetectorModel& model,
                         const std::vector<LabeledExample>& examples,
                         Exec exec) {
  std::vector<Label> truth;
  truth.reserve(examples.size());
  for (const auto& ex : examples) truth.push_back(ex.label);
  return accuracy(predict_labels(model, examples, exec), truth);
}

EvalMatrix cross_modal_matrix(
    const std::map<std::string, const DetectorModel*>& models,
    const std::vector<const SwapBackend*>& backends,
    const std::map<std::string, std::vector<Image>>& datasets,
    Exec exec) {
  if (models.empty() || backends.empty() || datasets.empty())
    throw ValidationError("cross_modal_matrix needs at least one model, "
                          "backend, and dataset");

  struct CellJob {
    const DetectorModel* model;
    const SwapBackend* backend;
    const std::string* dataset_id;
    const std::vector<Image>* images;
  };
  std::vector<CellJob> jobs;
  for (const auto& [name, model] : models) {
    (void)name;
    for (const SwapBackend* backend : backends)
      for (const auto& [dataset_id, images] : datasets)
        jobs.push_back({model, backend, &dataset_id, &images});
  }

  EvalMatrix matrix;
  matrix.cells.resize(jobs.size());

  const int n = static_cast<int>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const CellJob& job = jobs[i];
    EvalCell& cell = matrix.cells[i];
    cell.train_type = job.model->train_type;
    cell.train_swap_backend = job.model->train_swap_backend;
    cell.test_swap_backend = job.backend->id();
    cell.dataset_id = *job.dataset_id;
    try {
      const auto examples =
          build_test_set(*job.images, *job.backend, cell.dataset_id + "/");
      cell.accuracy = evaluate_accuracy(*job.model, examples, exec);
      cell.n_examples = static_cast<int>(examples.size());
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }

  std::set<std::string> keys;
  for (const auto& cell : matrix.cells) {
    const std::string key = cell.train_type + "|" + cell.train_swap_backend +
                            "|" + cell.test_swap_backend + "|" +
                            cell.dataset_id;
    if (!keys.insert(key).second)
      throw ValidationError("duplicate evaluation cell key: " + key);
  }
  return matrix;
}

std::string eval_matrix_csv(const EvalMatrix& matrix) {
  std::ostringstream out;
  out << "train_type,train_swap,test_swap,dataset,accuracy,n_examples\n";
  for (const auto& cell : matrix.cells) {
    if (!cell.ok()) continue;
    out << cell.train_type << ',' << cell.train_swap_backend << ','
        << cell.test_swap_backend << ',' << cell.dataset_id << ','
        << format_number(cell.accuracy) << ',' << cell.n_examples << '\n';
  }
  return out.str();
}

nlohmann::json eval_matrix_json(const EvalMatrix& matrix) {
  nlohmann::json cells = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& cell : matrix.cells) {
    nlohmann::json j{{"train_type", cell.train_type},
                     {"train_swap", cell.train_swap_backend},
                     {"test_swap", cell.test_swap_backend},
                     {"dataset", cell.dataset_id}};
    if (cell.ok()) {
      j["accuracy"] = cell.accuracy;
      j["n_examples"] = cell.n_examples;
      cells.push_back(std::move(j));
    } else {
      j["error"] = cell.error;
      failures.push_back(std::move(j));
    }
  }
  return nlohmann::json{{"cells", std::move(cells)},
                        {"failures", std::move(failures)},
                        {"manifest", matrix.manifest}};
}

}  // namespace synthdet
