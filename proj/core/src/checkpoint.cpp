#include "ntlc/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "ntlc/csvio.hpp"
#include "ntlc/errors.hpp"

namespace ntlc {
namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormatTag = "ntlchange-checkpoint";
constexpr int kFormatVersion = 1;

json tensor_values(const Tensor& t) {
  json arr = json::array();
  for (std::size_t e = 0; e < t.numel(); ++e) arr.push_back(t[e]);
  return arr;
}

void fill_tensor(Tensor& t, const json& arr, const std::string& what) {
  if (!arr.is_array() || arr.size() != t.numel()) {
    throw ParseError("checkpoint: " + what + " has " +
                     std::to_string(arr.is_array() ? arr.size() : 0) +
                     " values, expected " + std::to_string(t.numel()));
  }
  for (std::size_t e = 0; e < t.numel(); ++e) t[e] = arr[e].get<double>();
}

json layer_to_json(const Layer& layer) {
  json j;
  j["kind"] = layer.kind();
  if (const auto* d = dynamic_cast<const DenseLayer*>(&layer)) {
    j["in"] = d->in_features();
    j["units"] = d->units();
    j["w"] = tensor_values(d->w);
    j["b"] = tensor_values(d->b);
  } else if (const auto* c = dynamic_cast<const Conv1dLayer*>(&layer)) {
    j["in_channels"] = c->in_channels();
    j["filters"] = c->filters();
    j["kernel"] = c->kernel();
    j["padding"] = c->padding() == Conv1dLayer::Padding::same ? "same" : "valid";
    j["w"] = tensor_values(c->w);
    j["b"] = tensor_values(c->b);
  } else if (const auto* p = dynamic_cast<const MaxPool1dLayer*>(&layer)) {
    j["width"] = p->width();
    j["stride"] = p->stride();
  } else if (const auto* bn = dynamic_cast<const BatchNormLayer*>(&layer)) {
    j["channels"] = bn->channels();
    j["momentum"] = bn->momentum();
    j["epsilon"] = bn->epsilon();
    j["gamma"] = tensor_values(bn->gamma);
    j["beta"] = tensor_values(bn->beta);
    j["running_mean"] = tensor_values(bn->running_mean);
    j["running_var"] = tensor_values(bn->running_var);
  } else if (const auto* dr = dynamic_cast<const DropoutLayer*>(&layer)) {
    j["rate"] = dr->rate();
  } else if (const auto* l = dynamic_cast<const LstmLayer*>(&layer)) {
    j["in_features"] = l->in_features();
    j["units"] = l->units();
    j["return_sequences"] = l->return_sequences();
    j["wx"] = tensor_values(l->wx);
    j["wh"] = tensor_values(l->wh);
    j["b"] = tensor_values(l->b);
  }
  return j;
}

void layer_from_json(Layer& layer, const json& j, std::size_t index) {
  const std::string where = "layer " + std::to_string(index);
  const std::string kind = j.at("kind").get<std::string>();
  if (kind != layer.kind()) {
    throw ParseError("checkpoint: " + where + " is '" + kind + "', expected '" +
                     layer.kind() + "'");
  }
  if (auto* d = dynamic_cast<DenseLayer*>(&layer)) {
    fill_tensor(d->w, j.at("w"), where + " w");
    fill_tensor(d->b, j.at("b"), where + " b");
  } else if (auto* c = dynamic_cast<Conv1dLayer*>(&layer)) {
    fill_tensor(c->w, j.at("w"), where + " w");
    fill_tensor(c->b, j.at("b"), where + " b");
  } else if (auto* bn = dynamic_cast<BatchNormLayer*>(&layer)) {
    fill_tensor(bn->gamma, j.at("gamma"), where + " gamma");
    fill_tensor(bn->beta, j.at("beta"), where + " beta");
    fill_tensor(bn->running_mean, j.at("running_mean"), where + " running_mean");
    fill_tensor(bn->running_var, j.at("running_var"), where + " running_var");
  } else if (auto* l = dynamic_cast<LstmLayer*>(&layer)) {
    fill_tensor(l->wx, j.at("wx"), where + " wx");
    fill_tensor(l->wh, j.at("wh"), where + " wh");
    fill_tensor(l->b, j.at("b"), where + " b");
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedModel& model) {
  json j;
  j["format"] = kFormatTag;
  j["format_version"] = kFormatVersion;
  j["architecture"] = architecture_name(model.architecture);
  j["input_window"] = model.config.input_window;
  j["output_window"] = model.config.output_window;
  j["normalization"] = {{"mean", model.norm.mean}, {"scale", model.norm.scale}};
  j["run_seed"] = model.config.seed;
  j["model_seed"] = model.seed;
  j["train"] = {{"split_fraction", model.config.split_fraction},
                {"batch_size", model.config.batch_size},
                {"epochs", epochs_for(model.config, model.architecture)},
                {"dropout_rate", model.config.dropout_rate},
                {"max_norm_enabled", model.config.max_norm_enabled},
                {"max_norm", model.config.max_norm},
                {"activity_reg_enabled", model.config.activity_reg_enabled},
                {"activity_coeff", model.config.activity_coeff},
                {"adam",
                 {{"step_size", model.config.adam.step_size},
                  {"beta1", model.config.adam.beta1},
                  {"beta2", model.config.adam.beta2},
                  {"epsilon", model.config.adam.epsilon}}}};
  j["final_train_mae"] = model.final_train_mae();
  j["final_val_mae"] = model.final_val_mae();
  j["gradient_update_samples"] = model.gradient_update_samples;
  json hist = json::array();
  for (const EpochStats& e : model.history) {
    hist.push_back({{"train_mae", e.train_mae}, {"val_mae", e.val_mae}});
  }
  j["history"] = std::move(hist);
  json layers = json::array();
  for (std::size_t i = 0; i < model.net.size(); ++i) {
    json lj = layer_to_json(model.net.layer(i));
    lj["penalized"] = model.net.penalized(i);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  write_file_atomic(path, j.dump(2) + "\n");
}

TrainedModel load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kFormatTag) {
      throw ParseError("checkpoint " + path + ": unrecognized format tag");
    }
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw ParseError("checkpoint " + path + ": unsupported format version");
    }
    TrainedModel model;
    model.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    model.config.input_window = j.at("input_window").get<std::size_t>();
    model.config.output_window = j.at("output_window").get<std::size_t>();
    model.norm.mean = j.at("normalization").at("mean").get<double>();
    model.norm.scale = j.at("normalization").at("scale").get<double>();
    if (!(model.norm.scale > 0.0)) {
      throw ParseError("checkpoint " + path + ": normalization scale must be > 0");
    }
    model.config.seed = j.at("run_seed").get<std::uint64_t>();
    model.seed = j.at("model_seed").get<std::uint64_t>();
    const json& tr = j.at("train");
    model.config.split_fraction = tr.at("split_fraction").get<double>();
    model.config.batch_size = tr.at("batch_size").get<std::size_t>();
    const auto epochs = tr.at("epochs").get<std::size_t>();
    switch (model.architecture) {
      case Architecture::fcnn: model.config.epochs_fcnn = epochs; break;
      case Architecture::cnn: model.config.epochs_cnn = epochs; break;
      case Architecture::lstm: model.config.epochs_lstm = epochs; break;
    }
    model.config.dropout_rate = tr.at("dropout_rate").get<double>();
    model.config.max_norm_enabled = tr.at("max_norm_enabled").get<bool>();
    model.config.max_norm = tr.at("max_norm").get<double>();
    model.config.activity_reg_enabled = tr.at("activity_reg_enabled").get<bool>();
    model.config.activity_coeff = tr.at("activity_coeff").get<double>();
    const json& ad = tr.at("adam");
    model.config.adam.step_size = ad.at("step_size").get<double>();
    model.config.adam.beta1 = ad.at("beta1").get<double>();
    model.config.adam.beta2 = ad.at("beta2").get<double>();
    model.config.adam.epsilon = ad.at("epsilon").get<double>();
    model.gradient_update_samples = j.at("gradient_update_samples").get<std::uint64_t>();
    for (const json& e : j.at("history")) {
      model.history.push_back(
          {e.at("train_mae").get<double>(), e.at("val_mae").get<double>()});
    }

    model.net = build_architecture(model.architecture, model.config.input_window,
                                   model.config.output_window, model.config.dropout_rate);
    const json& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != model.net.size()) {
      throw ParseError("checkpoint " + path + ": expected " +
                       std::to_string(model.net.size()) + " layers, found " +
                       std::to_string(layers.size()));
    }
    for (std::size_t i = 0; i < model.net.size(); ++i) {
      layer_from_json(model.net.layer(i), layers[i], i);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace ntlc
