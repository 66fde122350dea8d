#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "symstream/audio.hpp"
#include "symstream/io.hpp"
#include "symstream/metrics.hpp"
#include "symstream/pipeline.hpp"
#include "symstream/synth.hpp"

using namespace symstream;
using nlohmann::json;

namespace {

std::string out_path(const std::string& p) { return p == "-" ? "/dev/stdout" : p; }

void add_config_flags(CLI::App* cmd, PipelineConfig& c, std::string& model) {
  cmd->add_option("--M", c.onset.smoothing, "Smoothing length in frames")->capture_default_str();
  cmd->add_option("--C", c.onset.sensitivity, "Median threshold sensitivity")->capture_default_str();
  cmd->add_option("--P", c.onset.lookahead, "Threshold look-ahead in frames")->capture_default_str();
  cmd->add_option("--W", c.onset.peak_window, "Peak window in frames")->capture_default_str();
  cmd->add_option("--theta_s", c.onset.silence, "Silence threshold")->capture_default_str();
  cmd->add_option("--window", c.onset.window, "STFT window")->capture_default_str();
  cmd->add_option("--hop", c.onset.hop, "STFT hop")->capture_default_str();
  cmd->add_option("--L", c.L_ms, "Analysis length in ms")->capture_default_str();
  cmd->add_option("--a", c.acuity, "Timbre acuity")->capture_default_str();
  cmd->add_option("--a_t", c.temporal_acuity, "IOI acuity in seconds")->capture_default_str();
  cmd->add_option("--model", model, "HN or CB")->capture_default_str();
  cmd->add_option("--N", c.max_length, "Maximum pattern length")->capture_default_str();
  cmd->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
}

std::vector<json> record_rows(const std::vector<EventRecord>& records) {
  std::vector<json> rows;
  for (const auto& r : records) rows.push_back(r.to_json());
  return rows;
}

int fail(const std::string& type, const std::string& message, int code) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic sequence learning from audio streams"};
  app.require_subcommand(1);

  PipelineConfig config;
  std::string model = "HN";
  std::string audio_path, annotations_path, out = "-", events_out, tree_out, descriptors_out, metric_out, model_out;

  auto* onsets = app.add_subcommand("onsets", "Detect onsets and write them as CSV");
  onsets->add_option("--audio", audio_path, "Input WAV")->required();
  onsets->add_option("--out", out, "Output CSV")->capture_default_str();
  onsets->add_option("--annotations", annotations_path, "Reference annotations for the F-measure");
  onsets->add_option("--metric-out", metric_out, "Metric JSON");
  add_config_flags(onsets, config, model);

  auto* transcribe = app.add_subcommand("transcribe", "Onsets, descriptors and clustering");
  transcribe->add_option("--audio", audio_path, "Input WAV")->required();
  transcribe->add_option("--annotations", annotations_path, "Reference annotations");
  bool at_annotations = false;
  transcribe->add_flag("--at-annotations", at_annotations, "Cluster at the annotated onsets instead of detected ones");
  transcribe->add_option("--out", out, "EventRecord JSONL")->capture_default_str();
  transcribe->add_option("--events-out", events_out, "Structural event log JSONL");
  transcribe->add_option("--tree-out", tree_out, "Cluster tree JSON");
  transcribe->add_option("--descriptors-out", descriptors_out, "Descriptor CSV");
  transcribe->add_option("--metric-out", metric_out, "Metric JSON");
  add_config_flags(transcribe, config, model);

  auto* expect = app.add_subcommand("expect", "Expectation curve over an annotated symbol sequence");
  std::string sequence_path;
  int n_l = 0;
  ExpectationParams ep;
  expect->add_option("--sequence", sequence_path, "Symbol sequence, one integer per line")->required();
  expect->add_option("--n_l", n_l, "Pattern length")->required();
  expect->add_option("--model", model, "HN or CB")->capture_default_str();
  expect->add_option("--N", ep.max_length, "Maximum pattern length")->capture_default_str();
  expect->add_option("--seed", ep.seed, "RNG seed")->capture_default_str();
  expect->add_option("--out", out, "Curve CSV")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Online symbol and IOI prediction");
  predict->add_option("--audio", audio_path, "Input WAV")->required();
  predict->add_option("--annotations", annotations_path, "Reference annotations")->required();
  predict->add_option("--out", out, "EventRecord JSONL")->capture_default_str();
  predict->add_option("--model-out", model_out, "HN table or CB net JSON after the run");
  predict->add_option("--metric-out", metric_out, "Metric JSON");
  add_config_flags(predict, config, model);

  auto* grid = app.add_subcommand("grid", "Parameter grid search");
  std::string task = "cluster", row_spec, col_spec;
  GridOptions go;
  grid->add_option("--task", task, "cluster, transcribe or predict")->capture_default_str();
  grid->add_option("--audio", audio_path, "Input WAV")->required();
  grid->add_option("--annotations", annotations_path, "Reference annotations")->required();
  grid->add_option("--rows", row_spec, "name:start:stop:step over L, a or a_t");
  grid->add_option("--cols", col_spec, "name:start:stop:step over L, a or a_t");
  grid->add_flag("--extend", go.extend, "Extend the grid while the best cell is on its border");
  grid->add_option("--max-extensions", go.max_extensions)->capture_default_str();
  grid->add_option("--threads", go.threads)->capture_default_str();
  grid->add_option("--out", out, "Metric table CSV")->capture_default_str();
  add_config_flags(grid, config, model);

  auto* synth = app.add_subcommand("synth", "Synthetic sequences and labeled audio");
  std::string pattern = "01", wav_out, ann_out, seq_out;
  int reps = 20, timbres = 3;
  double ioi = 0.4, p_skip = 0, p_switch = 0;
  std::uint64_t synth_seed = 1;
  synth->add_option("--pattern", pattern, "Base pattern as digits, e.g. 0102")->capture_default_str();
  synth->add_option("--repetitions", reps)->capture_default_str();
  synth->add_option("--skip", p_skip, "Skip noise probability")->capture_default_str();
  synth->add_option("--switch", p_switch, "Switch noise probability")->capture_default_str();
  synth->add_option("--ioi", ioi, "Inter-onset interval in seconds")->capture_default_str();
  synth->add_option("--timbres", timbres, "Number of timbre classes")->capture_default_str();
  synth->add_option("--seed", synth_seed)->capture_default_str();
  synth->add_option("--sequence-out", seq_out, "Symbol sequence file");
  synth->add_option("--wav-out", wav_out, "Rendered audio");
  synth->add_option("--annotations-out", ann_out, "Annotations CSV for the audio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    config.model = parse_model(model);
    ep.model = config.model;

    if (*onsets) {
      config.validate();
      const auto audio = read_wav(audio_path);
      const auto times = detect_onsets(audio, config.onset);
      write_onsets_csv(out_path(out), times);
      if (!annotations_path.empty()) {
        std::vector<double> ref;
        for (const auto& a : read_annotations(annotations_path)) ref.push_back(a.time);
        const auto score = onset_fmeasure(times, ref, config.onset_tolerance);
        const json m = metric_json("onset_f", score.f,
                                   {{"precision", score.precision}, {"recall", score.recall}, {"tolerance", config.onset_tolerance}});
        if (!metric_out.empty()) write_json(metric_out, m);
        else std::cerr << m.dump() << '\n';
      }
    } else if (*transcribe) {
      const auto audio = read_wav(audio_path);
      std::vector<Annotation> ann;
      if (!annotations_path.empty()) ann = read_annotations(annotations_path);
      ClusteringResult r;
      if (at_annotations) {
        r = run_clustering(audio, ann, config);
      } else if (ann.empty()) {
        const auto times = detect_onsets(audio, config.onset);
        if (times.empty()) throw InvalidArgument("no onsets detected");
        r = cluster_stream(times, describe(audio, times, config), config);
      } else {
        r = run_transcription(audio, ann, config);
      }
      write_jsonl(out_path(out), record_rows(r.records));
      if (!events_out.empty()) {
        std::vector<json> rows;
        for (const auto& e : r.log) rows.push_back(e.to_json());
        write_jsonl(events_out, rows);
      }
      if (!tree_out.empty()) write_json(tree_out, r.tree.to_json());
      if (!descriptors_out.empty()) write_descriptors_csv(descriptors_out, r.times, r.descriptors);
      if (!ann.empty()) {
        const json m = metric_json(at_annotations ? "clustering_ari" : "transcription_ari", r.ari, config.to_json());
        if (!metric_out.empty()) write_json(metric_out, m);
        else std::cerr << m.dump() << '\n';
      }
    } else if (*expect) {
      const auto seq = read_sequence(sequence_path);
      const auto curve = run_expectation(seq, n_l, ep);
      std::FILE* f = std::fopen(out_path(out).c_str(), "w");
      if (!f) throw std::runtime_error("cannot open " + out);
      std::fprintf(f, "t,ari\n");
      for (const auto& p : curve) std::fprintf(f, "%d,%.12g\n", p.t, p.ari);
      std::fclose(f);
    } else if (*predict) {
      const auto audio = read_wav(audio_path);
      const auto ann = read_annotations(annotations_path);
      config.validate();
      const auto onsets_found = detect_onsets(audio, config.onset);
      if (onsets_found.empty()) throw InvalidArgument("no onsets detected");
      const auto descriptors = describe(audio, onsets_found, config);
      const auto r = predict_stream(onsets_found, descriptors, ann, config);
      write_jsonl(out_path(out), record_rows(r.records));
      if (!model_out.empty()) {
        OnlinePredictor p(config);
        for (std::size_t i = 0; i < onsets_found.size(); ++i) p.step(onsets_found[i], descriptors[i]);
        write_json(model_out, p.net() ? p.net()->to_json() : p.table().to_json());
      }
      const json m = metric_json("prediction_ari", r.ari, config.to_json());
      if (!metric_out.empty()) write_json(metric_out, m);
      else std::cerr << m.dump() << '\n';
    } else if (*grid) {
      auto parse_axis = [](const std::string& spec) {
        std::vector<std::string> parts;
        std::size_t b = 0;
        for (std::size_t e; (e = spec.find(':', b)) != std::string::npos; b = e + 1) parts.push_back(spec.substr(b, e - b));
        parts.push_back(spec.substr(b));
        if (parts.size() != 4) throw InvalidArgument("axis spec must be name:start:stop:step, got '" + spec + "'");
        if (parts[0] != "L" && parts[0] != "a" && parts[0] != "a_t") throw InvalidArgument("unknown grid axis '" + parts[0] + "'");
        return GridAxis::range(parts[0], std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3]));
      };
      if (row_spec.empty()) row_spec = task == "predict" ? "a_t:0.05:0.125:0.025" : "L:50:175:25";
      if (col_spec.empty()) col_spec = task == "predict" ? "a:17:21:0.5" : "a:15:19:0.5";
      if (task != "cluster" && task != "transcribe" && task != "predict") throw InvalidArgument("unknown grid task '" + task + "'");
      const auto audio = read_wav(audio_path);
      const auto ann = read_annotations(annotations_path);
      const auto rows = parse_axis(row_spec);
      const auto cols = parse_axis(col_spec);
      auto evaluate = [&](double rv, double cv) {
        PipelineConfig c = config;
        auto set = [&](const std::string& name, double v) {
          if (name == "L") c.L_ms = v;
          else if (name == "a") c.acuity = v;
          else c.temporal_acuity = v;
        };
        set(rows.name, rv);
        set(cols.name, cv);
        c.validate();
        if (task == "cluster") return run_clustering(audio, ann, c).ari;
        if (task == "transcribe") return run_transcription(audio, ann, c).ari;
        return run_prediction(audio, ann, c).ari;
      };
      const auto result = grid_search(rows, cols, evaluate, go);
      std::FILE* f = std::fopen(out_path(out).c_str(), "w");
      if (!f) throw std::runtime_error("cannot open " + out);
      std::fputs(result.to_csv().c_str(), f);
      std::fclose(f);
      std::cerr << metric_json("grid_best", result.best(),
                               {{"task", task},
                                {rows.name, result.rows.values[static_cast<std::size_t>(result.best_row)]},
                                {cols.name, result.cols.values[static_cast<std::size_t>(result.best_col)]},
                                {"extensions", result.extensions}})
                       .dump()
                << '\n';
    } else if (*synth) {
      std::vector<int> base;
      for (char ch : pattern) {
        if (ch < '0' || ch > '9') throw InvalidArgument("pattern must be digits");
        base.push_back(ch - '0');
      }
      std::map<int, int> block;
      SetPartition part;
      for (std::size_t k = 0; k < base.size(); ++k) {
        auto [it, fresh] = block.try_emplace(base[k], static_cast<int>(part.size()));
        if (fresh) part.emplace_back();
        part[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(k));
      }
      PatternSpec spec{part, reps};
      auto seq = generate_sequence(spec);
      Rng rng(synth_seed);
      if (p_skip > 0) seq = apply_skip_noise(seq, p_skip, rng);
      if (p_switch > 0) seq = apply_switch_noise(seq, p_switch, spec.symbols(), rng);
      if (seq_out.empty() && wav_out.empty()) seq_out = "-";
      if (!seq_out.empty()) write_sequence(out_path(seq_out), seq);
      if (!wav_out.empty()) {
        SynthParams sp;
        sp.seed = synth_seed;
        auto t = default_timbres(std::max(timbres, spec.symbols()));
        const auto labeled = synthesize_labeled_audio(schedule(seq, ioi), t, sp);
        write_wav(wav_out, labeled.audio);
        if (!ann_out.empty()) write_annotations(ann_out, labeled.annotations);
      }
    }
  } catch (const InvalidArgument& e) {
    return fail("invalid_argument", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime_error", e.what(), 1);
  }
  return 0;
}
