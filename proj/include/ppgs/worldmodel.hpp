#ifndef PPGS_WORLDMODEL_HPP_
#define PPGS_WORLDMODEL_HPP_

// Latent world model: an encoder onto the unit hypersphere, a forward model
// that predicts the next embedding from (z, action, context observation) and
// a low-capacity inverse model that classifies the action behind a latent
// transition. The three networks are trained jointly on
//
//   alpha * L_fw + beta * L_ce + L_margin.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppgs/env.hpp"
#include "ppgs/numerics/mlp.hpp"
#include "ppgs/numerics/model_file.hpp"
#include "ppgs/random.hpp"

namespace ppgs {

using Embedding = Eigen::VectorXf;

struct WorldModelConfig {
  int dim = 16;
  double margin = 0.1;  // epsilon
  double alpha = 10.0;
  double beta = 1.0;
  int encoder_hidden = 2;
  int encoder_width = 256;
  int forward_hidden = 3;
  int forward_width = 256;
  int inverse_hidden = 1;
  int inverse_width = 32;
  bool use_context = true;  // false: fully latent forward model
};

// Input featurization. The kind-code channel is expanded into one binary
// plane per cell kind that occurs in the environment, followed by the agent
// and goal masks.
struct FeatureLayout {
  ObservationShape shape;
  std::vector<std::uint8_t> kind_codes;

  int planes() const { return static_cast<int>(kind_codes.size()) + 2; }
  int size() const { return planes() * shape.height * shape.width; }

  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

inline FeatureLayout FeatureLayoutFor(EnvId env) {
  FeatureLayout layout;
  layout.shape = ObservationShapeFor(env);
  switch (env) {
    case EnvId::kGridMaze:
      layout.kind_codes = {cell::kWall};
      break;
    case EnvId::kIceSlider:
      layout.kind_codes = {cell::kRock};
      break;
    case EnvId::kDigitJump:
      for (int k = 1; k <= 6; ++k) layout.kind_codes.push_back(cell::Digit(k));
      break;
  }
  return layout;
}

template <typename Derived>
void Featurize(const FeatureLayout& layout, const Observation& obs,
               Eigen::MatrixBase<Derived> const& column_const) {
  auto& column = const_cast<Eigen::MatrixBase<Derived>&>(column_const);
  if (!(obs.shape == layout.shape)) {
    throw std::invalid_argument("observation shape does not match the model input");
  }
  using Scalar = typename Derived::Scalar;
  const int hw = layout.shape.height * layout.shape.width;
  column.setZero();
  const std::uint8_t* kinds = obs.data.data();
  for (int i = 0; i < hw; ++i) {
    for (std::size_t k = 0; k < layout.kind_codes.size(); ++k) {
      if (kinds[i] == layout.kind_codes[k]) column(static_cast<int>(k) * hw + i) = Scalar(1);
    }
  }
  const int agent_plane = static_cast<int>(layout.kind_codes.size());
  for (int i = 0; i < hw; ++i) {
    column(agent_plane * hw + i) = static_cast<Scalar>(obs.data[hw + i]);
    column((agent_plane + 1) * hw + i) = static_cast<Scalar>(obs.data[2 * hw + i]);
  }
}

template <typename Scalar>
numerics::Matrix<Scalar> FeaturizeBatch(const FeatureLayout& layout,
                                        std::span<const Observation* const> observations) {
  numerics::Matrix<Scalar> out(layout.size(), static_cast<Eigen::Index>(observations.size()));
  for (std::size_t i = 0; i < observations.size(); ++i) {
    Featurize(layout, *observations[i], out.col(static_cast<Eigen::Index>(i)));
  }
  return out;
}

template <typename Scalar>
struct WorldModelGrads {
  numerics::MlpParams<Scalar> encoder;
  numerics::MlpParams<Scalar> forward;
  numerics::MlpParams<Scalar> inverse;
};

struct LossBreakdown {
  double forward = 0.0;
  double inverse = 0.0;
  double margin = 0.0;
  double total = 0.0;
};

inline double CombineLosses(double forward, double inverse, double margin, double alpha,
                            double beta) {
  return alpha * forward + beta * inverse + margin;
}

template <typename Scalar>
class BasicWorldModel {
 public:
  using Mat = numerics::Matrix<Scalar>;

  BasicWorldModel() = default;

  BasicWorldModel(EnvId env, const WorldModelConfig& config, std::uint64_t seed)
      : env_(env), config_(config), layout_(FeatureLayoutFor(env)) {
    if (config.dim < 2) throw std::invalid_argument("latent dimension must be at least 2");
    if (!(config.margin > 0)) throw std::invalid_argument("margin must be positive");
    encoder_spec_ = numerics::MlpSpec::Make(layout_.size(), config.encoder_hidden,
                                            config.encoder_width, config.dim);
    forward_spec_ = numerics::MlpSpec::Make(ForwardInputWidth(), config.forward_hidden,
                                            config.forward_width, config.dim);
    inverse_spec_ = numerics::MlpSpec::Make(2 * config.dim, config.inverse_hidden,
                                            config.inverse_width, kNumActions);
    Rng rng(DeriveSeed(seed, 0x3D0DE1));
    encoder_ = numerics::InitParams<Scalar>(encoder_spec_, rng);
    forward_ = numerics::InitParams<Scalar>(forward_spec_, rng);
    inverse_ = numerics::InitParams<Scalar>(inverse_spec_, rng);
  }

  EnvId env() const { return env_; }
  const WorldModelConfig& config() const { return config_; }
  const FeatureLayout& layout() const { return layout_; }
  int dim() const { return config_.dim; }
  double margin() const { return config_.margin; }

  const numerics::MlpSpec& encoder_spec() const { return encoder_spec_; }
  const numerics::MlpSpec& forward_spec() const { return forward_spec_; }
  const numerics::MlpSpec& inverse_spec() const { return inverse_spec_; }
  numerics::MlpParams<Scalar>& encoder() { return encoder_; }
  numerics::MlpParams<Scalar>& forward() { return forward_; }
  numerics::MlpParams<Scalar>& inverse() { return inverse_; }
  const numerics::MlpParams<Scalar>& encoder() const { return encoder_; }
  const numerics::MlpParams<Scalar>& forward() const { return forward_; }
  const numerics::MlpParams<Scalar>& inverse() const { return inverse_; }

  int ForwardInputWidth() const {
    return config_.dim + kNumActions + (config_.use_context ? layout_.size() : 0);
  }

  // Parameter blocks of all three networks in a fixed order.
  std::vector<Mat*> ParameterBlocks() {
    std::vector<Mat*> out = encoder_.Blocks();
    for (Mat* m : forward_.Blocks()) out.push_back(m);
    for (Mat* m : inverse_.Blocks()) out.push_back(m);
    return out;
  }

  WorldModelGrads<Scalar> ZeroGrads() const {
    return {numerics::ZeroParams<Scalar>(encoder_spec_),
            numerics::ZeroParams<Scalar>(forward_spec_),
            numerics::ZeroParams<Scalar>(inverse_spec_)};
  }

  // Unit-norm embeddings, one column per feature column.
  Mat EncodeFeatures(const Mat& features) const {
    return numerics::NormalizeColumns<Scalar>(
        numerics::Forward(encoder_spec_, encoder_, features).output());
  }

  Mat EncodeBatch(std::span<const Observation* const> observations) const {
    return EncodeFeatures(FeaturizeBatch<Scalar>(layout_, observations));
  }

  Embedding Encode(const Observation& obs) const {
    const Observation* p = &obs;
    return EncodeBatch(std::span<const Observation* const>(&p, 1)).col(0).template cast<float>();
  }

  // Forward-model input: [z; one_hot(action); context features].
  Mat ForwardInput(const Mat& z, std::span<const Action> actions, const Mat& context) const {
    if (z.rows() != config_.dim) throw std::invalid_argument("embedding has wrong dimension");
    if (static_cast<std::size_t>(z.cols()) != actions.size()) {
      throw std::invalid_argument("one action per embedding required");
    }
    Mat in = Mat::Zero(ForwardInputWidth(), z.cols());
    in.topRows(config_.dim) = z;
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      in(config_.dim + ActionIndex(actions[c]), c) = Scalar(1);
    }
    if (config_.use_context) {
      if (context.rows() != layout_.size()) {
        throw std::invalid_argument("context features have the wrong size");
      }
      if (context.cols() == 1) {
        in.bottomRows(layout_.size()).colwise() = context.col(0);
      } else if (context.cols() == z.cols()) {
        in.bottomRows(layout_.size()) = context;
      } else {
        throw std::invalid_argument("context must be a single column or one per sample");
      }
    }
    return in;
  }

  Mat PredictFeatures(const Mat& z, std::span<const Action> actions, const Mat& context) const {
    return numerics::NormalizeColumns<Scalar>(
        numerics::Forward(forward_spec_, forward_, ForwardInput(z, actions, context)).output());
  }

  // One context observation shared by every query.
  Mat PredictBatch(const Mat& z, std::span<const Action> actions,
                   const Observation& context) const {
    Mat ctx;
    if (config_.use_context) {
      const Observation* p = &context;
      ctx = FeaturizeBatch<Scalar>(layout_, std::span<const Observation* const>(&p, 1));
    }
    return PredictFeatures(z, actions, ctx);
  }

  Embedding Predict(const Embedding& z, Action action, const Observation& context) const {
    const Mat zc = z.cast<Scalar>();
    return PredictBatch(zc, std::span<const Action>(&action, 1), context).col(0).template cast<float>();
  }

  Mat InverseLogits(const Mat& z, const Mat& z_next) const {
    Mat in(2 * config_.dim, z.cols());
    in.topRows(config_.dim) = z;
    in.bottomRows(config_.dim) = z_next;
    return numerics::Forward(inverse_spec_, inverse_, in).output();
  }

 private:
  EnvId env_ = EnvId::kGridMaze;
  WorldModelConfig config_;
  FeatureLayout layout_;
  numerics::MlpSpec encoder_spec_;
  numerics::MlpSpec forward_spec_;
  numerics::MlpSpec inverse_spec_;
  numerics::MlpParams<Scalar> encoder_;
  numerics::MlpParams<Scalar> forward_;
  numerics::MlpParams<Scalar> inverse_;

  template <typename>
  friend class BasicWorldModel;

 public:
  // Assembles a model from stored networks, validating shapes.
  static BasicWorldModel Assemble(EnvId env, WorldModelConfig config, FeatureLayout layout,
                                  std::vector<numerics::NetworkRecord> nets) {
    if (nets.size() != 3) throw numerics::ModelFormatError("expected three networks");
    BasicWorldModel m;
    m.env_ = env;
    m.layout_ = std::move(layout);
    m.encoder_spec_ = nets[0].spec;
    m.forward_spec_ = nets[1].spec;
    m.inverse_spec_ = nets[2].spec;
    config.encoder_hidden = static_cast<int>(m.encoder_spec_.layers.size()) - 1;
    config.encoder_width = m.encoder_spec_.layers.front().width;
    config.forward_hidden = static_cast<int>(m.forward_spec_.layers.size()) - 1;
    config.forward_width = m.forward_spec_.layers.front().width;
    config.inverse_hidden = static_cast<int>(m.inverse_spec_.layers.size()) - 1;
    config.inverse_width = m.inverse_spec_.layers.front().width;
    m.config_ = config;
    if (m.encoder_spec_.input_width != m.layout_.size() ||
        m.encoder_spec_.output_width() != config.dim ||
        m.forward_spec_.input_width != m.ForwardInputWidth() ||
        m.forward_spec_.output_width() != config.dim ||
        m.inverse_spec_.input_width != 2 * config.dim ||
        m.inverse_spec_.output_width() != kNumActions) {
      throw numerics::ModelFormatError("network shapes are inconsistent with the header");
    }
    m.encoder_ = nets[0].params.template Cast<Scalar>();
    m.forward_ = nets[1].params.template Cast<Scalar>();
    m.inverse_ = nets[2].params.template Cast<Scalar>();
    return m;
  }

  template <typename Other>
  BasicWorldModel<Other> Cast() const {
    BasicWorldModel<Other> out;
    out.env_ = env_;
    out.config_ = config_;
    out.layout_ = layout_;
    out.encoder_spec_ = encoder_spec_;
    out.forward_spec_ = forward_spec_;
    out.inverse_spec_ = inverse_spec_;
    out.encoder_ = encoder_.template Cast<Other>();
    out.forward_ = forward_.template Cast<Other>();
    out.inverse_ = inverse_.template Cast<Other>();
    return out;
  }
};

using WorldModel = BasicWorldModel<float>;

// ---------------------------------------------------------------------------
// Losses on precomputed quantities. Columns are batch elements.

template <typename Scalar>
double ForwardLoss(const numerics::Matrix<Scalar>& predicted, const numerics::Matrix<Scalar>& target) {
  return static_cast<double>((predicted - target).colwise().squaredNorm().sum()) /
         static_cast<double>(predicted.cols());
}

template <typename Scalar>
numerics::Matrix<Scalar> LogSoftmax(const numerics::Matrix<Scalar>& logits) {
  numerics::Matrix<Scalar> out = logits;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Scalar m = logits.col(c).maxCoeff();
    const Scalar lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

template <typename Scalar>
double InverseLoss(const numerics::Matrix<Scalar>& logits, std::span<const Action> actions) {
  const auto logp = LogSoftmax(logits);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) sum -= logp(ActionIndex(actions[c]), c);
  return sum / static_cast<double>(logits.cols());
}

template <typename Scalar>
double MarginLoss(const numerics::Matrix<Scalar>& z, const numerics::Matrix<Scalar>& z_next,
                  double margin) {
  const double eps2 = margin * margin;
  double sum = 0.0;
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double d2 = static_cast<double>((z_next.col(c) - z.col(c)).squaredNorm());
    sum += std::max(0.0, 1.0 - d2 / eps2);
  }
  return sum / static_cast<double>(z.cols());
}

// A minibatch in feature space.
template <typename Scalar>
struct FeatureBatch {
  numerics::Matrix<Scalar> current;  // F x B
  numerics::Matrix<Scalar> next;     // F x B
  numerics::Matrix<Scalar> context;  // F x B
  std::vector<Action> actions;

  Eigen::Index size() const { return current.cols(); }
};

// Observation-level batch; every pointer must stay valid while in use.
struct TrainBatch {
  std::vector<const Observation*> current;
  std::vector<const Observation*> next;
  std::vector<const Observation*> context;
  std::vector<Action> actions;
  std::vector<int> level_ids;

  std::size_t size() const { return actions.size(); }
};

template <typename Scalar>
FeatureBatch<Scalar> FeaturizeTrainBatch(const FeatureLayout& layout, const TrainBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty training batch");
  FeatureBatch<Scalar> fb;
  fb.current = FeaturizeBatch<Scalar>(layout, batch.current);
  fb.next = FeaturizeBatch<Scalar>(layout, batch.next);
  fb.context = FeaturizeBatch<Scalar>(layout, batch.context);
  fb.actions = batch.actions;
  return fb;
}

// Evaluates all three losses and, when `grads` is non-null, accumulates the
// gradient of the weighted total with respect to every parameter.
template <typename Scalar>
LossBreakdown LossAndGradients(const BasicWorldModel<Scalar>& model, const FeatureBatch<Scalar>& batch,
                               WorldModelGrads<Scalar>* grads) {
  using Mat = numerics::Matrix<Scalar>;
  const Eigen::Index b = batch.size();
  if (b == 0) throw std::invalid_argument("empty training batch");
  const int d = model.dim();
  const WorldModelConfig& cfg = model.config();

  Mat enc_in(batch.current.rows(), 2 * b);
  enc_in.leftCols(b) = batch.current;
  enc_in.rightCols(b) = batch.next;
  const auto enc_cache = numerics::Forward(model.encoder_spec(), model.encoder(), enc_in);
  const Mat& raw = enc_cache.output();
  const Mat z = numerics::NormalizeColumns<Scalar>(raw);
  const Mat zc = z.leftCols(b);
  const Mat zn = z.rightCols(b);

  const Mat fw_in = model.ForwardInput(zc, batch.actions, batch.context);
  const auto fw_cache = numerics::Forward(model.forward_spec(), model.forward(), fw_in);
  const Mat& fraw = fw_cache.output();
  const Mat pred = numerics::NormalizeColumns<Scalar>(fraw);

  Mat inv_in(2 * d, b);
  inv_in.topRows(d) = zc;
  inv_in.bottomRows(d) = zn;
  const auto inv_cache = numerics::Forward(model.inverse_spec(), model.inverse(), inv_in);
  const Mat& logits = inv_cache.output();

  LossBreakdown loss;
  loss.forward = ForwardLoss<Scalar>(pred, zn);
  loss.inverse = InverseLoss<Scalar>(logits, batch.actions);
  loss.margin = MarginLoss<Scalar>(zc, zn, cfg.margin);
  loss.total = CombineLosses(loss.forward, loss.inverse, loss.margin, cfg.alpha, cfg.beta);
  if (grads == nullptr) return loss;

  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(b);
  const Mat diff = pred - zn;
  const Mat d_pred = diff * (Scalar(2 * cfg.alpha) * inv_b);
  Mat d_zn = -d_pred;
  Mat d_zc = Mat::Zero(d, b);

  if (cfg.beta != 0.0) {
    Mat d_logits = LogSoftmax<Scalar>(logits).array().exp().matrix();
    for (Eigen::Index c = 0; c < b; ++c) d_logits(ActionIndex(batch.actions[c]), c) -= Scalar(1);
    d_logits *= static_cast<Scalar>(cfg.beta) * inv_b;
    const Mat d_inv_in =
        numerics::Backward(model.inverse_spec(), model.inverse(), inv_cache, d_logits, grads->inverse);
    d_zc += d_inv_in.topRows(d);
    d_zn += d_inv_in.bottomRows(d);
  }

  const Scalar eps2 = static_cast<Scalar>(cfg.margin * cfg.margin);
  for (Eigen::Index c = 0; c < b; ++c) {
    const auto delta = (zn.col(c) - zc.col(c)).eval();
    if (Scalar(1) - delta.squaredNorm() / eps2 > Scalar(0)) {
      const Scalar coef = Scalar(-2) * inv_b / eps2;
      d_zn.col(c) += coef * delta;
      d_zc.col(c) -= coef * delta;
    }
  }

  const Mat d_fraw = numerics::NormalizeColumnsBackward<Scalar>(fraw, pred, d_pred);
  const Mat d_fw_in =
      numerics::Backward(model.forward_spec(), model.forward(), fw_cache, d_fraw, grads->forward);
  d_zc += d_fw_in.topRows(d);

  Mat d_z(d, 2 * b);
  d_z.leftCols(b) = d_zc;
  d_z.rightCols(b) = d_zn;
  const Mat d_raw = numerics::NormalizeColumnsBackward<Scalar>(raw, z, d_z);
  numerics::Backward(model.encoder_spec(), model.encoder(), enc_cache, d_raw, grads->encoder);
  return loss;
}

template <typename Scalar>
LossBreakdown ComputeLosses(const BasicWorldModel<Scalar>& model, const TrainBatch& batch) {
  return LossAndGradients<Scalar>(model, FeaturizeTrainBatch<Scalar>(model.layout(), batch), nullptr);
}

template <typename Scalar>
double LossForward(const BasicWorldModel<Scalar>& model, const TrainBatch& batch) {
  return ComputeLosses(model, batch).forward;
}
template <typename Scalar>
double LossInverse(const BasicWorldModel<Scalar>& model, const TrainBatch& batch) {
  return ComputeLosses(model, batch).inverse;
}
template <typename Scalar>
double LossMargin(const BasicWorldModel<Scalar>& model, const TrainBatch& batch) {
  return ComputeLosses(model, batch).margin;
}
template <typename Scalar>
double LossTotal(const BasicWorldModel<Scalar>& model, const TrainBatch& batch) {
  return ComputeLosses(model, batch).total;
}

// ---------------------------------------------------------------------------
// Checkpoints: the numerics model file with a header extension
//   u32 env | u32 dim | f32 margin | f32 alpha | f32 beta | u8 use_context
//   u32 channels | u32 height | u32 width | u32 kind_count | u8 kind codes...

inline std::vector<std::uint8_t> EncodeWorldModel(const WorldModel& model) {
  numerics::ByteWriter ext;
  ext.U32(static_cast<std::uint32_t>(model.env()));
  ext.U32(static_cast<std::uint32_t>(model.dim()));
  ext.F32(static_cast<float>(model.config().margin));
  ext.F32(static_cast<float>(model.config().alpha));
  ext.F32(static_cast<float>(model.config().beta));
  ext.U8(model.config().use_context ? 1 : 0);
  const FeatureLayout& layout = model.layout();
  ext.U32(static_cast<std::uint32_t>(layout.shape.channels));
  ext.U32(static_cast<std::uint32_t>(layout.shape.height));
  ext.U32(static_cast<std::uint32_t>(layout.shape.width));
  ext.U32(static_cast<std::uint32_t>(layout.kind_codes.size()));
  for (std::uint8_t k : layout.kind_codes) ext.U8(k);
  return numerics::EncodeModelFile(
      ext.bytes(), {{model.encoder_spec(), model.encoder()},
                    {model.forward_spec(), model.forward()},
                    {model.inverse_spec(), model.inverse()}});
}

inline void SaveWorldModel(const WorldModel& model, std::ostream& os) {
  const auto bytes = EncodeWorldModel(model);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed to write world model");
}

inline void SaveWorldModel(const WorldModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  SaveWorldModel(model, os);
}

inline WorldModel LoadWorldModel(std::istream& is) {
  numerics::DecodedModelFile file = numerics::ReadModelFile(is);
  numerics::ByteReader ext(file.extension);
  const std::uint32_t env_code = ext.U32();
  if (env_code > 2) throw numerics::ModelFormatError("unknown environment code");
  const auto env = static_cast<EnvId>(env_code);
  WorldModelConfig config;
  config.dim = static_cast<int>(ext.U32());
  config.margin = ext.F32();
  config.alpha = ext.F32();
  config.beta = ext.F32();
  config.use_context = ext.U8() != 0;
  FeatureLayout layout;
  layout.shape.channels = static_cast<int>(ext.U32());
  layout.shape.height = static_cast<int>(ext.U32());
  layout.shape.width = static_cast<int>(ext.U32());
  const std::uint32_t kinds = ext.U32();
  for (std::uint32_t i = 0; i < kinds; ++i) layout.kind_codes.push_back(ext.U8());
  if (!ext.AtEnd()) throw numerics::ModelFormatError("unexpected bytes in model header");
  if (!(layout.shape == ObservationShapeFor(env))) {
    throw numerics::ModelFormatError("observation shape does not match the environment");
  }
  return WorldModel::Assemble(env, config, std::move(layout), std::move(file.networks));
}

inline WorldModel LoadWorldModel(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return LoadWorldModel(is);
}

}  // namespace ppgs

#endif  // PPGS_WORLDMODEL_HPP_
