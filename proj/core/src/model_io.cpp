#include "napc/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "napc/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model container is little-endian; big-endian hosts need byte swaps");

namespace napc::io {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'N', 'A', 'P', 'C'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
void write_blob(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
void read_blob(std::istream& in, std::vector<T>& v, size_t count,
               const std::string& name) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw DataError("model file truncated in blob '" + name + "'");
}

ordered_json spec_to_json(const nn::ModelSpec& spec) {
  return ordered_json{{"input_dim", spec.input_dim},
                      {"lstm_layers", spec.lstm_layers},
                      {"lstm_units", spec.lstm_units},
                      {"num_classes", spec.num_classes},
                      {"abs_activation", spec.head.abs_activation},
                      {"cumsum", spec.head.cumsum}};
}

nn::ModelSpec spec_from_json(const ordered_json& j) {
  nn::ModelSpec spec;
  spec.input_dim = j.at("input_dim").get<size_t>();
  spec.lstm_layers = j.at("lstm_layers").get<size_t>();
  spec.lstm_units = j.at("lstm_units").get<size_t>();
  spec.num_classes = j.at("num_classes").get<size_t>();
  spec.head.abs_activation = j.at("abs_activation").get<bool>();
  spec.head.cumsum = j.at("cumsum").get<bool>();
  spec.validate();
  return spec;
}

ordered_json blob_entry(const std::string& name, const char* dtype, size_t count) {
  return ordered_json{{"name", name}, {"dtype", dtype}, {"count", count}};
}

void write_container(const fs::path& path, const ordered_json& meta,
                     const std::function<void(std::ostream&)>& write_blobs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file " + path.string());
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const std::string meta_str = meta.dump();
  write_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  write_blobs(out);
  out.flush();
  if (!out) throw DataError("short write to model file " + path.string());
}

}  // namespace

void save_model(const fs::path& path, const nn::ModelSpec& spec,
                const nn::Weights& weights) {
  ordered_json meta;
  meta["kind"] = "float";
  meta["spec"] = spec_to_json(spec);
  ordered_json blobs = ordered_json::array();
  blobs.push_back(blob_entry("fc_in.w", "f32", weights.fc_in_w.size()));
  blobs.push_back(blob_entry("fc_in.b", "f32", weights.fc_in_b.size()));
  for (size_t l = 0; l < weights.lstm.size(); ++l) {
    const std::string p = "lstm" + std::to_string(l);
    blobs.push_back(blob_entry(p + ".w", "f32", weights.lstm[l].w.size()));
    blobs.push_back(blob_entry(p + ".u", "f32", weights.lstm[l].u.size()));
    blobs.push_back(blob_entry(p + ".b", "f32", weights.lstm[l].b.size()));
  }
  blobs.push_back(blob_entry("fc_out.w", "f32", weights.fc_out_w.size()));
  blobs.push_back(blob_entry("fc_out.b", "f32", weights.fc_out_b.size()));
  meta["blobs"] = std::move(blobs);

  write_container(path, meta, [&weights](std::ostream& out) {
    weights.for_each_param(
        [&out](const std::vector<float>& v) { write_blob(out, v); });
  });
}

void save_model(const fs::path& path, const quant::QuantizedModel& qm) {
  ordered_json meta;
  meta["kind"] = "quantized";
  meta["spec"] = spec_to_json(qm.spec);
  meta["bit_width"] = qm.bit_width;
  meta["activation_mode"] =
      qm.activation_mode == quant::ActivationMode::kLut ? "lut" : "float";
  ordered_json scales = ordered_json::array();
  for (const auto& s : qm.scales)
    scales.push_back(ordered_json{{"w_exp", s.w_exp}, {"i_exp", s.i_exp}});
  meta["scales"] = std::move(scales);
  meta["input_bound"] = qm.input_bound;
  meta["lut"] = ordered_json{{"resolution", qm.lut_resolution},
                             {"clamp", qm.lut_clamp},
                             {"embedded", !qm.lut_sigmoid.empty()}};

  ordered_json blobs = ordered_json::array();
  blobs.push_back(blob_entry("fc_in.w", "i32", qm.fc_in_w.size()));
  blobs.push_back(blob_entry("fc_in.b", "i32", qm.fc_in_b.size()));
  for (size_t l = 0; l < qm.lstm.size(); ++l) {
    const std::string p = "lstm" + std::to_string(l);
    blobs.push_back(blob_entry(p + ".w", "i32", qm.lstm[l].w.size()));
    blobs.push_back(blob_entry(p + ".u", "i32", qm.lstm[l].u.size()));
    blobs.push_back(blob_entry(p + ".b", "i32", qm.lstm[l].b.size()));
  }
  blobs.push_back(blob_entry("fc_out.w", "i32", qm.fc_out_w.size()));
  blobs.push_back(blob_entry("fc_out.b", "i32", qm.fc_out_b.size()));
  if (!qm.lut_sigmoid.empty()) {
    blobs.push_back(blob_entry("lut.sigmoid", "f32", qm.lut_sigmoid.size()));
    blobs.push_back(blob_entry("lut.tanh", "f32", qm.lut_tanh.size()));
  }
  meta["blobs"] = std::move(blobs);

  write_container(path, meta, [&qm](std::ostream& out) {
    write_blob(out, qm.fc_in_w.data);
    write_blob(out, qm.fc_in_b);
    for (const auto& l : qm.lstm) {
      write_blob(out, l.w.data);
      write_blob(out, l.u.data);
      write_blob(out, l.b);
    }
    write_blob(out, qm.fc_out_w.data);
    write_blob(out, qm.fc_out_b);
    if (!qm.lut_sigmoid.empty()) {
      write_blob(out, qm.lut_sigmoid);
      write_blob(out, qm.lut_tanh);
    }
  });
}

LoadedModel load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a napc model file: " + path.string());
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != kVersion)
    throw DataError("unsupported model format version " + std::to_string(version));
  uint64_t meta_len = 0;
  in.read(reinterpret_cast<char*>(&meta_len), sizeof meta_len);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw DataError("model file truncated in metadata");

  ordered_json meta;
  try {
    meta = ordered_json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt model metadata: ") + e.what());
  }

  LoadedModel model;
  model.spec = spec_from_json(meta.at("spec"));
  const std::string kind = meta.at("kind").get<std::string>();

  auto expect_count = [&meta](size_t blob_idx, const std::string& name) {
    const auto& e = meta.at("blobs").at(blob_idx);
    if (e.at("name").get<std::string>() != name)
      throw DataError("unexpected blob order: wanted '" + name + "', found '" +
                      e.at("name").get<std::string>() + "'");
    return e.at("count").get<size_t>();
  };

  if (kind == "float") {
    nn::Weights w = nn::make_weights<float>(model.spec);
    size_t idx = 0;
    read_blob(in, w.fc_in_w.data, expect_count(idx++, "fc_in.w"), "fc_in.w");
    read_blob(in, w.fc_in_b, expect_count(idx++, "fc_in.b"), "fc_in.b");
    for (size_t l = 0; l < w.lstm.size(); ++l) {
      const std::string p = "lstm" + std::to_string(l);
      read_blob(in, w.lstm[l].w.data, expect_count(idx++, p + ".w"), p + ".w");
      read_blob(in, w.lstm[l].u.data, expect_count(idx++, p + ".u"), p + ".u");
      read_blob(in, w.lstm[l].b, expect_count(idx++, p + ".b"), p + ".b");
    }
    read_blob(in, w.fc_out_w.data, expect_count(idx++, "fc_out.w"), "fc_out.w");
    read_blob(in, w.fc_out_b, expect_count(idx++, "fc_out.b"), "fc_out.b");
    model.weights = std::move(w);
  } else if (kind == "quantized") {
    quant::QuantizedModel qm;
    qm.spec = model.spec;
    qm.bit_width = meta.at("bit_width").get<int>();
    qm.activation_mode = meta.at("activation_mode").get<std::string>() == "lut"
                             ? quant::ActivationMode::kLut
                             : quant::ActivationMode::kFloat;
    for (const auto& s : meta.at("scales"))
      qm.scales.push_back(
          {s.at("w_exp").get<int>(), s.at("i_exp").get<int>()});
    if (qm.scales.size() != qm.layer_count())
      throw DataError("quantized model has wrong scale count");
    qm.input_bound = meta.at("input_bound").get<float>();
    qm.lut_resolution = meta.at("lut").at("resolution").get<size_t>();
    qm.lut_clamp = meta.at("lut").at("clamp").get<double>();
    const bool embedded = meta.at("lut").at("embedded").get<bool>();

    qm.fc_in_w = Mat<int32_t>(model.spec.input_dim, model.spec.lstm_units);
    qm.fc_out_w = Mat<int32_t>(model.spec.lstm_units, model.spec.num_classes);
    qm.lstm.resize(model.spec.lstm_layers);
    size_t idx = 0;
    read_blob(in, qm.fc_in_w.data, expect_count(idx++, "fc_in.w"), "fc_in.w");
    read_blob(in, qm.fc_in_b, expect_count(idx++, "fc_in.b"), "fc_in.b");
    for (size_t l = 0; l < qm.lstm.size(); ++l) {
      const std::string p = "lstm" + std::to_string(l);
      auto& layer = qm.lstm[l];
      layer.w = Mat<int32_t>(model.spec.lstm_units, 4 * model.spec.lstm_units);
      layer.u = Mat<int32_t>(model.spec.lstm_units, 4 * model.spec.lstm_units);
      read_blob(in, layer.w.data, expect_count(idx++, p + ".w"), p + ".w");
      read_blob(in, layer.u.data, expect_count(idx++, p + ".u"), p + ".u");
      read_blob(in, layer.b, expect_count(idx++, p + ".b"), p + ".b");
    }
    read_blob(in, qm.fc_out_w.data, expect_count(idx++, "fc_out.w"), "fc_out.w");
    read_blob(in, qm.fc_out_b, expect_count(idx++, "fc_out.b"), "fc_out.b");
    if (embedded) {
      read_blob(in, qm.lut_sigmoid, expect_count(idx++, "lut.sigmoid"),
                "lut.sigmoid");
      read_blob(in, qm.lut_tanh, expect_count(idx++, "lut.tanh"), "lut.tanh");
    }
    model.qmodel = std::move(qm);
  } else {
    throw DataError("unknown model kind '" + kind + "'");
  }
  return model;
}

}  // namespace napc::io
