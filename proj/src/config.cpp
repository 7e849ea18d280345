#include "sofs/config.hpp"

#include <charconv>
#include <map>
#include <sstream>

namespace sofs {

void RunConfig::validate() const {
  if (shots < 1) throw ParameterError("config: shots must be >= 1");
  if (crops_per_shot < 1) throw ParameterError("config: crops_per_shot must be >= 1");
  if (input_size % l || test_input_size % l)
    throw ParameterError("config: input sizes must be divisible by l");
  if (alpha < 0.0f || alpha > 1.0f) throw ParameterError("config: alpha outside [0,1]");
  if (!(tau > 0.0f)) throw ParameterError("config: tau must be positive");
  if (!(eta > 0.0f)) throw ParameterError("config: eta must be positive");
  if (beta < 0.0f || gamma < 0.0f) throw ParameterError("config: negative loss weight");
  if (downsample != "prototype" && downsample != "bilinear")
    throw ParameterError("config: downsample must be prototype|bilinear");
  if (fuse_axis != "query" && fuse_axis != "support")
    throw ParameterError("config: fuse_axis must be query|support");
  if (loss != "mndl" && loss != "dice") throw ParameterError("config: loss must be mndl|dice");
  if (mode != "fss" && mode != "fad") throw ParameterError("config: mode must be fss|fad");
  if (test_fold < 0 || test_fold >= n_folds) throw ParameterError("config: test_fold out of range");
  if (epochs < 0 || episodes_per_epoch < 0 || batch_size < 1)
    throw ParameterError("config: bad training sizes");
  EncoderConfig enc = encoder_config();
  if (embed % heads) throw ParameterError("config: embed must be divisible by heads");
  (void)enc;
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig e;
  e.seed = seed;
  e.l = l;
  return e;
}

HeadConfig RunConfig::head_config() const {
  HeadConfig h;
  h.channels = encoder_config().concat_channels();
  h.embed = embed;
  h.heads = heads;
  h.tau = tau;
  h.fuse_axis = fuse_axis == "query" ? FuseAxis::QueryAxis : FuseAxis::SupportAxis;
  h.mask_downsample = downsample == "prototype" ? MaskDownsample::PrototypeIntensity
                                                : MaskDownsample::Bilinear;
  return h;
}

LossConfig RunConfig::loss_config() const {
  LossConfig lc;
  lc.eta = eta;
  lc.beta = beta;
  lc.gamma = gamma;
  lc.dice_eps = dice_eps;
  return lc;
}

SamplerConfig RunConfig::sampler_config(bool training) const {
  SamplerConfig s;
  s.input_size = training ? input_size : test_input_size;
  s.shots = shots;
  s.crops_per_shot = crops_per_shot;
  s.alpha = training ? alpha : 0.0f;
  s.augment = training && augment_train;
  return s;
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s;
  s.image_size = gen_image_size;
  s.images_per_class = gen_images_per_class;
  s.area_min = gen_area_min;
  s.area_max = gen_area_max;
  s.seed = seed;
  s.n_folds = n_folds;
  return s;
}

namespace {

template <typename T>
std::string num_str(T v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string RunConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["alpha"] = num_str(alpha);
  kv["augment_train"] = augment_train ? "true" : "false";
  kv["batch_size"] = num_str(batch_size);
  kv["beta"] = num_str(beta);
  kv["crops_per_shot"] = num_str(crops_per_shot);
  kv["dataset_root"] = dataset_root;
  kv["dice_eps"] = num_str(dice_eps);
  kv["downsample"] = downsample;
  kv["embed"] = num_str(embed);
  kv["epochs"] = num_str(epochs);
  kv["episodes_per_epoch"] = num_str(episodes_per_epoch);
  kv["eta"] = num_str(eta);
  kv["eval_episodes_per_class"] = num_str(eval_episodes_per_class);
  kv["eval_normal_episodes"] = num_str(eval_normal_episodes);
  kv["eval_runs"] = num_str(eval_runs);
  kv["fuse_axis"] = fuse_axis;
  kv["gamma"] = num_str(gamma);
  kv["gen_area_max"] = num_str(gen_area_max);
  kv["gen_area_min"] = num_str(gen_area_min);
  kv["gen_image_size"] = num_str(gen_image_size);
  kv["gen_images_per_class"] = num_str(gen_images_per_class);
  kv["heads"] = num_str(heads);
  kv["input_size"] = num_str(input_size);
  kv["l"] = num_str(l);
  kv["loss"] = loss;
  kv["lr"] = num_str(lr);
  kv["mode"] = mode;
  kv["n_folds"] = num_str(n_folds);
  kv["out_dir"] = out_dir;
  kv["poly_power"] = num_str(poly_power);
  kv["seed"] = num_str(seed);
  kv["shots"] = num_str(shots);
  kv["tau"] = num_str(tau);
  kv["test_fold"] = num_str(test_fold);
  kv["test_input_size"] = num_str(test_input_size);
  kv["weight_decay"] = num_str(weight_decay);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
  return os.str();
}

RunConfig RunConfig::from_kv(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_f = [&] { return std::stof(value); };
    auto as_d = [&] { return std::stod(value); };
    auto as_i = [&] { return std::stoi(value); };
    auto as_u64 = [&] { return static_cast<uint64_t>(std::stoull(value)); };
    auto as_b = [&] {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw FormatError("config: boolean expected for " + key);
    };

    if (key == "alpha") cfg.alpha = as_f();
    else if (key == "augment_train") cfg.augment_train = as_b();
    else if (key == "batch_size") cfg.batch_size = as_i();
    else if (key == "beta") cfg.beta = as_f();
    else if (key == "crops_per_shot") cfg.crops_per_shot = as_i();
    else if (key == "dataset_root") cfg.dataset_root = value;
    else if (key == "dice_eps") cfg.dice_eps = as_f();
    else if (key == "downsample") cfg.downsample = value;
    else if (key == "embed") cfg.embed = as_i();
    else if (key == "epochs") cfg.epochs = as_i();
    else if (key == "episodes_per_epoch") cfg.episodes_per_epoch = as_i();
    else if (key == "eta") cfg.eta = as_f();
    else if (key == "eval_episodes_per_class") cfg.eval_episodes_per_class = as_i();
    else if (key == "eval_normal_episodes") cfg.eval_normal_episodes = as_i();
    else if (key == "eval_runs") cfg.eval_runs = as_i();
    else if (key == "fuse_axis") cfg.fuse_axis = value;
    else if (key == "gamma") cfg.gamma = as_f();
    else if (key == "gen_area_max") cfg.gen_area_max = as_d();
    else if (key == "gen_area_min") cfg.gen_area_min = as_d();
    else if (key == "gen_image_size") cfg.gen_image_size = as_i();
    else if (key == "gen_images_per_class") cfg.gen_images_per_class = as_i();
    else if (key == "heads") cfg.heads = as_i();
    else if (key == "input_size") cfg.input_size = as_i();
    else if (key == "l") cfg.l = as_i();
    else if (key == "loss") cfg.loss = value;
    else if (key == "lr") cfg.lr = as_f();
    else if (key == "mode") cfg.mode = value;
    else if (key == "n_folds") cfg.n_folds = as_i();
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "poly_power") cfg.poly_power = as_f();
    else if (key == "seed") cfg.seed = as_u64();
    else if (key == "shots") cfg.shots = as_i();
    else if (key == "tau") cfg.tau = as_f();
    else if (key == "test_fold") cfg.test_fold = as_i();
    else if (key == "test_input_size") cfg.test_input_size = as_i();
    else if (key == "weight_decay") cfg.weight_decay = as_f();
    else throw FormatError("config: unknown key '" + key + "'");
  }
  return cfg;
}

}  // namespace sofs
