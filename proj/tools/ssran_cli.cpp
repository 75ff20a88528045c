// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ssran/checkpoint.hpp"
#include "ssran/data.hpp"
#include "ssran/metrics.hpp"
#include "ssran/model.hpp"
#include "ssran/train.hpp"
#include "ssran/version.hpp"

namespace {

using namespace ssran;

struct ModelOpts {
  std::size_t d_model = 128, d_ff = 512, heads = 8;
  std::size_t enc_layers = 2, ran_layers = 3, dec_layers = 4;
  int rel_clip = 16;
  double dropout = 0.1;
  std::string ablation = "none";
};

void add_model_flags(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--d-model", m.d_model, "Model width")->capture_default_str();
  cmd->add_option("--d-ff", m.d_ff, "Feed-forward width")->capture_default_str();
  cmd->add_option("--heads", m.heads, "Attention heads")->capture_default_str();
  cmd->add_option("--enc-layers", m.enc_layers, "Encoder layers")->capture_default_str();
  cmd->add_option("--ran-layers", m.ran_layers, "Result-attention layers")->capture_default_str();
  cmd->add_option("--dec-layers", m.dec_layers, "Decoder layers")->capture_default_str();
  cmd->add_option("--rel-clip", m.rel_clip, "Relative-position clip distance")
      ->capture_default_str();
  cmd->add_option("--dropout", m.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--ablation", m.ablation, "Variant: none, no_sr, no_ran, no_aux, basic_model")
      ->check(CLI::IsMember({"none", "no_sr", "no_ran", "no_aux", "basic_model"}))
      ->capture_default_str();
}

ModelConfig to_config(const ModelOpts& m, const Vocabs& v) {
  ModelConfig c;
  c.d_model = m.d_model;
  c.d_ff = m.d_ff;
  c.heads = m.heads;
  c.encoder_layers = m.enc_layers;
  c.ran_layers = m.ran_layers;
  c.decoder_layers = m.dec_layers;
  c.rel_clip = m.rel_clip;
  c.dropout = m.dropout;
  c.vocab_size = v.tokens.size();
  c.num_slots = v.slots.size();
  c.num_intents = v.intents.size();
  c.no_sr = m.ablation == "no_sr";
  c.no_ran = m.ablation == "no_ran";
  c.no_aux = m.ablation == "no_aux";
  c.basic_model = m.ablation == "basic_model";
  return c;
}

std::string ablation_name(const ModelConfig& c) {
  if (c.basic_model) return "basic_model";
  if (c.no_sr) return "no_sr";
  if (c.no_ran) return "no_ran";
  if (c.no_aux) return "no_aux";
  return "none";
}

DecodeMode parse_decode(const std::string& s) {
  if (s == "topk") return DecodeMode::kTopk;
  if (s == "threshold") return DecodeMode::kThreshold;
  return DecodeMode::kAuto;
}

std::string config_header(const ModelConfig& mc, const TrainConfig& tc) {
  char buf[640];
  std::snprintf(buf, sizeof(buf),
                "version=%s\n"
                "d_model=%zu d_ff=%zu heads=%zu enc_layers=%zu ran_layers=%zu dec_layers=%zu "
                "rel_clip=%d dropout=%g\n"
                "vocab=%zu slots=%zu intents=%zu ablation=%s\n"
                "lr=%g batch_size=%zu alpha=%g lambda=%g epochs=%zu seed=%llu clip_norm=%g "
                "decode=%s threshold=%g",
                kVersion, mc.d_model, mc.d_ff, mc.heads, mc.encoder_layers, mc.ran_layers,
                mc.decoder_layers, mc.rel_clip, mc.dropout, mc.vocab_size, mc.num_slots,
                mc.num_intents, ablation_name(mc).c_str(), tc.lr, tc.batch_size, tc.alpha,
                tc.lambda, tc.epochs, static_cast<unsigned long long>(tc.seed), tc.clip_norm,
                decode_mode_name(tc.decode), tc.threshold);
  return buf;
}

std::vector<Utterance> load_capped(const std::string& path, std::size_t max_len) {
  auto utts = load_corpus_file(path);
  const std::size_t dropped = filter_overlong(utts, max_len);
  if (dropped)
    std::cerr << "warning: dropped " << dropped << " utterance(s) longer than " << max_len
              << " tokens from " << path << "\n";
  return utts;
}

void write_scope_csvs(const std::string& dir, const std::vector<Utterance>& utts,
                      const std::vector<Prediction>& preds) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Tensor& w = preds[i].scope;
    char name[64];
    std::snprintf(name, sizeof(name), "scope_%06zu.csv", i);
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw ValueError("cannot write scope file in " + dir);
    out << "#";
    for (const auto& t : utts[i].tokens) out << ' ' << t;
    out << '\n';
    const std::size_t n = w.rows();
    char num[40];
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        std::snprintf(num, sizeof(num), "%.17g", w.at(r, c));
        out << (c ? "," : "") << num;
      }
      out << '\n';
    }
  }
}

int cmd_train(const std::string& train_path, const std::string& dev_path,
              const std::string& ckpt_out, std::string history_path, std::size_t max_len,
              const ModelOpts& mopts, TrainConfig tc) {
  auto train_utts = load_capped(train_path, max_len);
  auto dev_utts = load_capped(dev_path, max_len);
  if (train_utts.empty() || dev_utts.empty()) {
    std::cerr << "error: empty train or dev corpus\n";
    return 1;
  }
  const Vocabs vocabs = build_vocabs(train_utts);
  std::cout << "vocab " << vocabs.tokens.size() << " tokens, " << vocabs.slots.size()
            << " slots, " << vocabs.intents.size() << " intents; train " << train_utts.size()
            << " dev " << dev_utts.size() << " utterances\n";
  const ModelConfig mc = to_config(mopts, vocabs);
  Model model(mc, tc.seed);
  const FitResult res = fit(model, train_utts, dev_utts, vocabs, tc, &std::cout);
  if (history_path.empty()) history_path = ckpt_out + ".history.tsv";
  write_history(history_path, res, config_header(mc, tc));
  save_checkpoint(ckpt_out, model, vocabs);
  std::cout << "best epoch " << res.best_epoch << " dev overall " << res.best_dev_overall
            << "; checkpoint " << ckpt_out << "; history " << history_path << "\n";
  return 0;
}

int cmd_eval(const std::string& test_path, const std::string& ckpt_in, const std::string& decode,
             double threshold, const std::string& report_path, std::size_t max_len) {
  auto [model, vocabs] = load_checkpoint(ckpt_in);
  auto utts = load_capped(test_path, max_len);
  const DecodeMode mode = resolve_decode_mode(parse_decode(decode), model.cfg());
  const MetricReport r = evaluate(model, utts, vocabs, mode, threshold);
  std::cout << "checkpoint " << ckpt_in << " (" << ablation_name(model.cfg()) << "), decode "
            << decode_mode_name(mode) << ", " << utts.size() << " utterances\n\n"
            << format_report_table(r) << "\n" << format_report_kv(r);
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) throw ValueError("cannot write report " + report_path);
    TrainConfig tc;
    tc.decode = mode;
    tc.threshold = threshold;
    std::istringstream hdr(config_header(model.cfg(), tc));
    std::string line;
    while (std::getline(hdr, line)) out << "# " << line << '\n';
    out << format_report_kv(r);
  }
  return 0;
}

int cmd_predict(const std::string& test_path, const std::string& ckpt_in, const std::string& out_path,
                const std::string& decode, double threshold, const std::string& scope_dir,
                std::size_t max_len) {
  auto [model, vocabs] = load_checkpoint(ckpt_in);
  auto utts = load_capped(test_path, max_len);
  const DecodeMode mode = resolve_decode_mode(parse_decode(decode), model.cfg());
  const bool want_scope = !scope_dir.empty();
  const auto preds = predict_corpus(model, utts, vocabs, mode, threshold, want_scope);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValueError("cannot write predictions " + out_path);
  write_predictions(out, utts, preds);
  if (want_scope) write_scope_csvs(scope_dir, utts, preds);
  std::cout << "wrote " << preds.size() << " prediction(s) to " << out_path << "\n";
  return 0;
}

int cmd_dump_scope(const std::string& test_path, const std::string& ckpt_in,
                   const std::string& out_dir, std::size_t max_len) {
  auto [model, vocabs] = load_checkpoint(ckpt_in);
  auto utts = load_capped(test_path, max_len);
  const auto preds =
      predict_corpus(model, utts, vocabs, DecodeMode::kAuto, 0.5, /*want_scope=*/true);
  write_scope_csvs(out_dir, utts, preds);
  std::cout << "wrote " << preds.size() << " scope matrix file(s) to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SSRAN: joint multi-intent detection and slot filling"};
  app.set_version_flag("--version", ssran::kVersion);
  app.set_config("--config");
  app.require_subcommand(1);

  std::string train_path, dev_path, test_path, ckpt_in, ckpt_out, history_path, report_path,
      out_path, scope_dir;
  std::string decode = "auto";
  std::size_t max_len = 64;
  ModelOpts mopts;
  ssran::TrainConfig tc;
  tc.epochs = 50;
  double threshold = 0.5;

  auto* train = app.add_subcommand("train", "Train a model and keep the best dev checkpoint");
  train->add_option("--train", train_path, "Training corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--dev", dev_path, "Validation corpus")->required()->check(CLI::ExistingFile);
  train->add_option("--ckpt-out", ckpt_out, "Checkpoint output path")->required();
  train->add_option("--history", history_path, "History TSV path (default: <ckpt>.history.tsv)");
  train->add_option("--seed", tc.seed, "RNG seed")->capture_default_str();
  train->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", tc.lr, "Adam learning rate")->capture_default_str();
  train->add_option("--batch-size", tc.batch_size, "Batch size")->capture_default_str();
  train->add_option("--alpha", tc.alpha, "Slot/intent loss mix")->capture_default_str();
  train->add_option("--lambda", tc.lambda, "Auxiliary loss weight")->capture_default_str();
  train->add_option("--clip-norm", tc.clip_norm, "Gradient clip norm")->capture_default_str();
  train->add_option("--stop-train-overall", tc.stop_train_overall,
                    "Stop once train overall accuracy reaches this (off when < 0)")
      ->capture_default_str();
  train->add_option("--max-len", max_len, "Drop longer utterances")->capture_default_str();
  train->add_option("--decode", decode, "Dev decoding: auto, topk, threshold")
      ->check(CLI::IsMember({"auto", "topk", "threshold"}))
      ->capture_default_str();
  train->add_option("--threshold", threshold, "Threshold-decoding cutoff")->capture_default_str();
  add_model_flags(train, mopts);

  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a labeled corpus");
  eval->add_option("--test", test_path, "Test corpus")->required()->check(CLI::ExistingFile);
  eval->add_option("--ckpt-in", ckpt_in, "Checkpoint path")->required()->check(CLI::ExistingFile);
  eval->add_option("--decode", decode, "Decoding: auto, topk, threshold")
      ->check(CLI::IsMember({"auto", "topk", "threshold"}))
      ->capture_default_str();
  eval->add_option("--threshold", threshold, "Threshold-decoding cutoff")->capture_default_str();
  eval->add_option("--report", report_path, "Write key=value report here");
  eval->add_option("--max-len", max_len, "Drop longer utterances")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Write predictions for a corpus");
  predict->add_option("--test", test_path, "Input corpus")->required()->check(CLI::ExistingFile);
  predict->add_option("--ckpt-in", ckpt_in, "Checkpoint path")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "Prediction file")->required();
  predict->add_option("--decode", decode, "Decoding: auto, topk, threshold")
      ->check(CLI::IsMember({"auto", "topk", "threshold"}))
      ->capture_default_str();
  predict->add_option("--threshold", threshold, "Threshold-decoding cutoff")->capture_default_str();
  predict->add_option("--dump-scope", scope_dir, "Also write per-utterance scope CSVs here");
  predict->add_option("--max-len", max_len, "Drop longer utterances")->capture_default_str();

  auto* dump = app.add_subcommand("dump-scope", "Write scope weight matrices as CSV");
  dump->add_option("--test", test_path, "Input corpus")->required()->check(CLI::ExistingFile);
  dump->add_option("--ckpt-in", ckpt_in, "Checkpoint path")->required()->check(CLI::ExistingFile);
  dump->add_option("--out", out_path, "Output directory")->required();
  dump->add_option("--max-len", max_len, "Drop longer utterances")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  tc.decode = parse_decode(decode);
  tc.threshold = threshold;

  try {
    if (train->parsed())
      return cmd_train(train_path, dev_path, ckpt_out, history_path, max_len, mopts, tc);
    if (eval->parsed())
      return cmd_eval(test_path, ckpt_in, decode, threshold, report_path, max_len);
    if (predict->parsed())
      return cmd_predict(test_path, ckpt_in, out_path, decode, threshold, scope_dir, max_len);
    if (dump->parsed()) return cmd_dump_scope(test_path, ckpt_in, out_path, max_len);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
