#pragma once

// Command-line front end: `run`, `simulate` and `decode` subcommands.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "sec/device_sim.hpp"
#include "sec/pipeline.hpp"
#include "sec/protocol.hpp"

namespace sec::cli {

inline constexpr int kExitUsage = 2;

struct SimulateOptions {
  std::string frames = "-";
  sim::Model model = sim::Model::vibro;
  double dt = 1.0;
  std::optional<std::uint8_t> channel;
};

struct DecodeOptions {
  std::string frames = "-";
};

struct HelpText {
  std::string text;
};

using Command = std::variant<PipelineConfig, SimulateOptions, DecodeOptions, HelpText>;

/// "console" | "sim" | "tcp:<host>:<port>" | "udp:<host>:<port>" |
/// "serial:<device>[:<baud>]"
inline SinkSpec parse_sink_spec(const std::string& text) {
  SinkSpec spec;
  auto fail = [&](const std::string& why) -> SinkSpec {
    throw UsageError("--sink '" + text + "': " + why);
  };
  if (text == "console") return spec;
  if (text == "sim") {
    spec.kind = SinkSpec::Kind::sim;
    return spec;
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos) return fail("unknown sink kind");
  const std::string kind = text.substr(0, colon);
  const std::string rest = text.substr(colon + 1);
  if (kind == "tcp" || kind == "udp") {
    auto hp = net::parse_host_port(rest);
    if (!hp || hp->host.empty() || hp->port == 0) return fail("expected <host>:<port>");
    spec.kind = kind == "tcp" ? SinkSpec::Kind::tcp : SinkSpec::Kind::udp;
    spec.target = rest;
    return spec;
  }
  if (kind == "serial") {
    spec.kind = SinkSpec::Kind::serial;
    spec.target = rest;
    const auto last = rest.rfind(':');
    if (last != std::string::npos) {
      const std::string baud = rest.substr(last + 1);
      if (!baud.empty() && baud.find_first_not_of("0123456789") == std::string::npos) {
        spec.baud = std::stoi(baud);
        spec.target = rest.substr(0, last);
        if (baud_constant(spec.baud) == B0) return fail("unsupported baud " + baud);
      }
    }
    if (spec.target.empty()) return fail("missing device path");
    return spec;
  }
  return fail("unknown sink kind '" + kind + "'");
}

inline Command parse_args(int argc, const char* const* argv) {
  CLI::App app{"Speech emotion conversion: audio to valence/arousal/dominance to actuators",
               "sec"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  PipelineConfig cfg;
  std::string tail = "drop";
  std::string backend = "baseline";
  std::string pcm_format = "int16";
  std::string udp_listen;
  std::string mapping;
  std::vector<std::string> sinks;
  std::string log_level = [] {
    const char* env = std::getenv("SEC_LOG");
    return std::string(env ? env : "info");
  }();

  auto* run = app.add_subcommand("run", "Run the audio -> emotion -> actuator pipeline");
  run->add_option("--input", cfg.input, "WAV file, or '-' for raw PCM on stdin");
  run->add_option("--pcm-rate", cfg.pcm_rate, "Sample rate (Hz) of raw PCM on stdin");
  run->add_option("--pcm-format", pcm_format, "Raw PCM encoding: int16|float32");
  run->add_option("--window", cfg.chunk.window_s, "Analysis window (s)");
  run->add_option("--hop", cfg.chunk.hop_s, "Hop between windows (s)");
  run->add_option("--tail", tail, "Final partial window: drop|pad|short");
  run->add_option("--backend", backend, "Estimator backend: baseline|udp");
  run->add_option("--udp-listen", udp_listen, "host:port for json-vad datagrams (udp backend)");
  run->add_option("--udp-count", cfg.udp_max_count, "Stop after this many datagrams (0 = never)");
  run->add_option("--udp-idle", cfg.udp_idle_timeout_s, "Stop after this many idle seconds (0 = never)");
  run->add_option("--alpha", cfg.affect.alpha, "EMA smoothing factor in (0,1]");
  run->add_option("--neutral-band", cfg.affect.neutral_band, "Neutral band half-width in [0,0.5)");
  run->add_option("--hold", cfg.affect.hold_count, "Consecutive observations before a label change");
  run->add_option("--mapping", mapping, "Mapping config JSON (default: built-in)");
  run->add_option("--sink", sinks,
                  "console | sim | tcp:<host>:<port> | udp:<host>:<port> | serial:<dev>[:baud]"
                  " (repeatable)")
      ->default_str("");
  run->add_option("--log-level", log_level, "debug|info|warn (env SEC_LOG)");

  SimulateOptions sim_opts;
  std::string model = "vibro";
  std::optional<int> channel;
  auto* simulate = app.add_subcommand("simulate", "Drive a device model from a serial frame stream");
  simulate->add_option("--frames", sim_opts.frames, "Frame byte stream file, or '-' for stdin");
  simulate->add_option("--model", model, "vibro|proxemic");
  simulate->add_option("--dt", sim_opts.dt, "Simulated seconds per frame");
  simulate->add_option("--channel", channel, "Channel id to follow (default: first record)");

  DecodeOptions dec_opts;
  auto* decode = app.add_subcommand("decode", "Hex-dump the frames found in a serial byte stream");
  decode->add_option("--frames", dec_opts.frames, "Frame byte stream file, or '-' for stdin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    return HelpText{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    return HelpText{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (simulate->parsed()) {
    auto m = sim::parse_model(model);
    if (!m) throw UsageError("--model must be vibro or proxemic");
    sim_opts.model = *m;
    if (!(sim_opts.dt > 0.0)) throw UsageError("--dt must be > 0");
    if (channel) {
      if (*channel < 0 || *channel > 255) throw UsageError("--channel must be in 0..255");
      sim_opts.channel = static_cast<std::uint8_t>(*channel);
    }
    return sim_opts;
  }
  if (decode->parsed()) return dec_opts;

  // run
  if (!(cfg.chunk.window_s > 0.0) || !std::isfinite(cfg.chunk.window_s)) {
    throw UsageError("--window must be > 0");
  }
  if (!(cfg.chunk.hop_s > 0.0) || !std::isfinite(cfg.chunk.hop_s)) {
    throw UsageError("--hop must be > 0");
  }
  if (cfg.chunk.hop_s > cfg.chunk.window_s) throw UsageError("--hop must not exceed --window");
  if (seconds_to_samples(cfg.chunk.hop_s, kCanonicalRate) == 0) {
    throw UsageError("--hop is shorter than one sample");
  }
  auto t = parse_tail_policy(tail);
  if (!t) throw UsageError("--tail must be drop, pad or short");
  cfg.chunk.tail = *t;
  if (!(cfg.affect.alpha > 0.0 && cfg.affect.alpha <= 1.0)) throw UsageError("--alpha must be in (0,1]");
  if (!(cfg.affect.neutral_band >= 0.0 && cfg.affect.neutral_band < 0.5)) {
    throw UsageError("--neutral-band must be in [0,0.5)");
  }
  if (cfg.affect.hold_count < 1) throw UsageError("--hold must be >= 1");
  if (cfg.udp_idle_timeout_s < 0.0) throw UsageError("--udp-idle must be >= 0");

  if (backend == "baseline") {
    cfg.backend = Backend::baseline;
    if (cfg.input.empty()) throw UsageError("--input is required with --backend baseline");
    if (!udp_listen.empty()) throw UsageError("--udp-listen requires --backend udp");
  } else if (backend == "udp") {
    cfg.backend = Backend::udp;
    if (udp_listen.empty()) throw UsageError("--backend udp requires --udp-listen");
    auto hp = net::parse_host_port(udp_listen);
    if (!hp) throw UsageError("--udp-listen must be <host>:<port>");
    cfg.udp_listen = *hp;
    if (!cfg.input.empty()) throw UsageError("--input cannot be combined with --backend udp");
  } else {
    throw UsageError("--backend must be baseline or udp");
  }

  if (pcm_format == "int16") {
    cfg.pcm_format = PcmEncoding::int16_le;
  } else if (pcm_format == "float32") {
    cfg.pcm_format = PcmEncoding::float32_le;
  } else {
    throw UsageError("--pcm-format must be int16 or float32");
  }
  if (cfg.input == "-" && !cfg.pcm_rate) throw UsageError("--input - requires --pcm-rate");
  if (cfg.pcm_rate && *cfg.pcm_rate <= 0) throw UsageError("--pcm-rate must be > 0");

  if (!mapping.empty()) cfg.mapping_path = mapping;
  if (sinks.empty()) throw UsageError("at least one --sink is required");
  for (const auto& s : sinks) cfg.sinks.push_back(parse_sink_spec(s));
  if (log_level != "debug" && log_level != "info" && log_level != "warn") {
    throw UsageError("--log-level must be debug, info or warn");
  }
  cfg.log_level = log::parse_level(log_level);
  return cfg;
}

namespace detail {

// Streams bytes from a file or stdin ("-") to `sink` in blocks.
inline void for_each_block(const std::string& path,
                           const std::function<void(std::span<const std::uint8_t>)>& sink) {
  std::ifstream file;
  std::istream* in = &std::cin;
  if (path != "-") {
    file.open(path, std::ios::binary);
    if (!file) throw IoFailure("cannot open '" + path + "'");
    in = &file;
  }
  std::vector<char> buf(4096);
  while (*in) {
    in->read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto n = static_cast<std::size_t>(in->gcount());
    if (n == 0) break;
    sink(std::span(reinterpret_cast<const std::uint8_t*>(buf.data()), n));
  }
  if (in->bad()) throw IoFailure("read error on '" + path + "'");
}

inline std::string decoder_stats_line(const DecoderStats& s) {
  return "frames=" + std::to_string(s.frames) + " checksum_errors=" +
         std::to_string(s.checksum_errors) + " unknown_version=" + std::to_string(s.unknown_version) +
         " bad_count=" + std::to_string(s.bad_count) + " skipped_bytes=" +
         std::to_string(s.skipped_bytes);
}

}  // namespace detail

inline int run_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  FrameDecoder decoder;
  sim::FrameTrace trace(o.model, o.dt, o.channel, out);
  std::vector<SerialFrame> frames;
  try {
    detail::for_each_block(o.frames, [&](std::span<const std::uint8_t> bytes) {
      frames.clear();
      decoder.feed(bytes, frames);
      for (const auto& f : frames) trace.on_frame(f);
    });
  } catch (const Error& e) {
    err << "error: device-sim: " << e.what() << '\n';
    return 1;
  }
  err << "simulate: " << detail::decoder_stats_line(decoder.stats()) << '\n';
  return 0;
}

inline std::string hex_dump(std::span<const std::uint8_t> bytes) {
  std::string s;
  char b[4];
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::snprintf(b, sizeof b, i ? " %02X" : "%02X", bytes[i]);
    s += b;
  }
  return s;
}

inline int run_decode(const DecodeOptions& o, std::ostream& out, std::ostream& err) {
  FrameDecoder decoder;
  std::vector<SerialFrame> frames;
  try {
    detail::for_each_block(o.frames, [&](std::span<const std::uint8_t> bytes) {
      frames.clear();
      decoder.feed(bytes, frames);
      for (const auto& f : frames) {
        char head[48];
        std::snprintf(head, sizeof head, "seq=%3u count=%2zu |", f.seq, f.records.size());
        out << head << ' ' << hex_dump(encode_frame(f)) << " |";
        for (const auto& r : f.records) out << " ch" << int(r.channel_id) << '=' << r.value;
        out << '\n';
      }
    });
  } catch (const Error& e) {
    err << "error: wire-sinks: " << e.what() << '\n';
    return 1;
  }
  err << "decode: " << detail::decoder_stats_line(decoder.stats()) << '\n';
  return 0;
}

/// Full CLI behavior minus process plumbing. Returns the exit status.
inline int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                      const std::atomic<bool>& stop) {
  Command cmd;
  try {
    cmd = parse_args(argc, argv);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for the full flag list.\n";
    return kExitUsage;
  }
  if (auto* help = std::get_if<HelpText>(&cmd)) {
    out << help->text;
    return 0;
  }
  if (auto* s = std::get_if<SimulateOptions>(&cmd)) return run_simulate(*s, out, err);
  if (auto* d = std::get_if<DecodeOptions>(&cmd)) return run_decode(*d, out, err);

  const auto& cfg = std::get<PipelineConfig>(cmd);
  log::threshold() = cfg.log_level;
  RunSummary summary = run_pipeline(cfg, out, stop);
  out.flush();
  if (summary.exit_code == 1) {
    err << "error: " << summary.failed_stage << ": " << summary.error << '\n';
  }
  if (summary.interrupted) err << "interrupted; flushed pending output\n";
  err << format_summary(summary);
  return summary.exit_code;
}

}  // namespace sec::cli
