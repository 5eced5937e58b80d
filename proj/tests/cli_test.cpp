#include <gtest/gtest.h>
#include <sys/wait.h>

#include <csignal>
#include <fstream>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "sec/cli.hpp"

namespace sec::cli {
namespace {

Command parse(std::vector<std::string> args) {
  args.insert(args.begin(), "sec");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_args(static_cast<int>(argv.size()), argv.data());
}

std::string usage_message(std::vector<std::string> args) {
  try {
    parse(std::move(args));
  } catch (const UsageError& e) {
    return e.what();
  }
  return {};
}

TEST(ParseArgs, RunDefaults) {
  auto cmd = parse({"run", "--input", "a.wav", "--sink", "console"});
  auto& cfg = std::get<PipelineConfig>(cmd);
  EXPECT_EQ(cfg.input, "a.wav");
  EXPECT_EQ(cfg.chunk.window_s, 1.0);
  EXPECT_EQ(cfg.chunk.hop_s, 1.0);
  EXPECT_EQ(cfg.chunk.tail, TailPolicy::drop);
  EXPECT_EQ(cfg.backend, Backend::baseline);
  EXPECT_EQ(cfg.affect.alpha, 0.4);
  EXPECT_EQ(cfg.affect.neutral_band, 0.1);
  EXPECT_EQ(cfg.affect.hold_count, 2);
  ASSERT_EQ(cfg.sinks.size(), 1u);
  EXPECT_EQ(cfg.sinks[0].kind, SinkSpec::Kind::console);
}

TEST(ParseArgs, AllFlags) {
  auto cmd = parse({"run", "--input", "-", "--pcm-rate", "8000", "--pcm-format", "float32", "--window",
                    "2", "--hop", "0.5", "--tail", "pad", "--alpha", "0.7", "--neutral-band", "0.05",
                    "--hold", "3", "--mapping", "m.json", "--sink", "tcp:localhost:9000", "--sink",
                    "serial:/dev/ttyUSB0:57600", "--sink", "udp:127.0.0.1:5005", "--log-level", "warn"});
  auto& cfg = std::get<PipelineConfig>(cmd);
  EXPECT_EQ(cfg.pcm_rate, 8000);
  EXPECT_EQ(cfg.pcm_format, PcmEncoding::float32_le);
  EXPECT_EQ(cfg.chunk.tail, TailPolicy::pad_zero);
  EXPECT_EQ(cfg.affect.hold_count, 3);
  EXPECT_EQ(cfg.mapping_path, "m.json");
  ASSERT_EQ(cfg.sinks.size(), 3u);
  EXPECT_EQ(cfg.sinks[0].target, "localhost:9000");
  EXPECT_EQ(cfg.sinks[1].kind, SinkSpec::Kind::serial);
  EXPECT_EQ(cfg.sinks[1].target, "/dev/ttyUSB0");
  EXPECT_EQ(cfg.sinks[1].baud, 57600);
  EXPECT_EQ(cfg.sinks[2].kind, SinkSpec::Kind::udp);
  EXPECT_EQ(cfg.log_level, log::Level::warn);
}

TEST(ParseArgs, UsageErrorsNameTheFlag) {
  const std::vector<std::string> base = {"run", "--input", "a.wav", "--sink", "console"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return usage_message(args);
  };
  EXPECT_NE(with({"--window", "0"}).find("--window"), std::string::npos);
  EXPECT_NE(with({"--hop", "-1"}).find("--hop"), std::string::npos);
  EXPECT_NE(with({"--window", "0.5", "--hop", "1"}).find("--hop"), std::string::npos);
  EXPECT_NE(with({"--alpha", "0"}).find("--alpha"), std::string::npos);
  EXPECT_NE(with({"--neutral-band", "0.5"}).find("--neutral-band"), std::string::npos);
  EXPECT_NE(with({"--hold", "0"}).find("--hold"), std::string::npos);
  EXPECT_NE(with({"--tail", "keep"}).find("--tail"), std::string::npos);
  EXPECT_NE(with({"--sink", "ftp:x"}).find("--sink"), std::string::npos);
  EXPECT_NE(usage_message({"run", "--backend", "udp", "--sink", "console"}).find("--udp-listen"),
            std::string::npos);
  EXPECT_NE(usage_message({"run", "--sink", "console"}).find("--input"), std::string::npos);
  EXPECT_NE(usage_message({"run", "--input", "-", "--sink", "console"}).find("--pcm-rate"),
            std::string::npos);
  EXPECT_NE(usage_message({"run", "--input", "a.wav"}).find("--sink"), std::string::npos);
  EXPECT_FALSE(usage_message({"run", "--bogus"}).empty());
  EXPECT_FALSE(usage_message({}).empty());
}

TEST(ParseArgs, HelpIsNotAnError) {
  auto cmd = parse({"--help"});
  ASSERT_TRUE(std::holds_alternative<HelpText>(cmd));
  EXPECT_NE(std::get<HelpText>(cmd).text.find("run"), std::string::npos);
  auto sub = parse({"run", "--help"});
  ASSERT_TRUE(std::holds_alternative<HelpText>(sub));
  EXPECT_NE(std::get<HelpText>(sub).text.find("--window"), std::string::npos);
}

TEST(ParseArgs, SimulateAndDecode) {
  auto s = std::get<SimulateOptions>(parse({"simulate", "--frames", "f.bin", "--model", "proxemic",
                                            "--dt", "0.5", "--channel", "1"}));
  EXPECT_EQ(s.model, sim::Model::proxemic);
  EXPECT_EQ(s.dt, 0.5);
  EXPECT_EQ(s.channel, std::uint8_t{1});
  EXPECT_NE(usage_message({"simulate", "--model", "servo"}).find("--model"), std::string::npos);
  EXPECT_EQ(std::get<DecodeOptions>(parse({"decode", "--frames", "x"})).frames, "x");
}

TEST(MainEntry, UsageErrorExitsTwo) {
  const char* argv[] = {"sec", "run", "--input", "a.wav", "--sink", "console", "--window", "0"};
  std::ostringstream out, err;
  std::atomic<bool> stop{false};
  EXPECT_EQ(main_entry(8, argv, out, err, stop), kExitUsage);
  EXPECT_NE(err.str().find("--window"), std::string::npos);
}

TEST(MainEntry, DecodeHexDump) {
  const std::string path = ::testing::TempDir() + "golden_frame.bin";
  {
    std::ofstream f(path, std::ios::binary);
    const unsigned char bytes[] = {0x00, 0xAA, 0x55, 0x01, 0x00, 0x01, 0x01, 0x07, 0xD0, 0xD6};
    f.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
  }
  const char* argv[] = {"sec", "decode", "--frames", path.c_str()};
  std::ostringstream out, err;
  std::atomic<bool> stop{false};
  EXPECT_EQ(main_entry(4, argv, out, err, stop), 0);
  EXPECT_EQ(out.str(), "seq=  0 count= 1 | AA 55 01 00 01 01 07 D0 D6 | ch1=2000\n");
  EXPECT_NE(err.str().find("frames=1"), std::string::npos);
  EXPECT_NE(err.str().find("skipped_bytes=1"), std::string::npos);
}

TEST(MainEntry, SimulateProxemicTrace) {
  const std::string path = ::testing::TempDir() + "prox_frames.bin";
  {
    std::ofstream f(path, std::ios::binary);
    for (std::uint8_t seq = 0; seq < 3; ++seq) {
      auto bytes = encode_frame(SerialFrame{1, seq, {{1, 1000}}});
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
  }
  const char* argv[] = {"sec", "simulate", "--frames", path.c_str(), "--model", "proxemic"};
  std::ostringstream out, err;
  std::atomic<bool> stop{false};
  EXPECT_EQ(main_entry(6, argv, out, err, stop), 0);
  EXPECT_EQ(out.str(), "time,value\n1.000000,1.000000\n2.000000,1.000000\n3.000000,1.000000\n");
}

// Runs the real binary with stdin connected to a pipe.
struct Child {
  pid_t pid = -1;
  int stdin_fd = -1;
  int stdout_fd = -1;
  int stderr_fd = -1;

  explicit Child(const std::vector<std::string>& args) {
    int in[2], out[2], err[2];
    if (::pipe(in) != 0 || ::pipe(out) != 0 || ::pipe(err) != 0) throw std::runtime_error("pipe");
    pid = ::fork();
    if (pid == 0) {
      ::dup2(in[0], 0);
      ::dup2(out[1], 1);
      ::dup2(err[1], 2);
      for (int fd : {in[0], in[1], out[0], out[1], err[0], err[1]}) ::close(fd);
      std::vector<char*> argv;
      std::string tool = SEC_TOOL_PATH;
      argv.push_back(tool.data());
      std::vector<std::string> copy = args;
      for (auto& a : copy) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(tool.c_str(), argv.data());
      ::_exit(127);
    }
    ::close(in[0]);
    ::close(out[1]);
    ::close(err[1]);
    stdin_fd = in[1];
    stdout_fd = out[0];
    stderr_fd = err[0];
  }

  void close_stdin() {
    if (stdin_fd >= 0) ::close(stdin_fd);
    stdin_fd = -1;
  }

  static std::string drain(int fd) {
    std::string s;
    char buf[4096];
    ssize_t n;
    while ((n = ::read(fd, buf, sizeof buf)) > 0) s.append(buf, static_cast<std::size_t>(n));
    ::close(fd);
    return s;
  }

  struct Result {
    int exit_code;
    std::string out;
    std::string err;
  };

  Result wait() {
    close_stdin();
    std::string out_text, err_text;
    std::thread t([&] { err_text = drain(stderr_fd); });
    out_text = drain(stdout_fd);
    t.join();
    int status = 0;
    ::waitpid(pid, &status, 0);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status), out_text, err_text};
  }
};

TEST(Binary, UsageErrorExitsTwo) {
  auto r = Child({"run", "--input", "a.wav", "--sink", "console", "--window", "0"}).wait();
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("--window"), std::string::npos);
}

TEST(Binary, MissingFileExitsOneNamingStage) {
  auto r = Child({"run", "--input", "/nonexistent/in.wav", "--sink", "console"}).wait();
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("audio-io"), std::string::npos);
}

TEST(Binary, RunsWavToConsole) {
  const std::string path = ::testing::TempDir() + "cli_three.wav";
  write_wav(path, testing::sine(150, 0.5, 16000, 48000), 16000);
  auto r = Child({"run", "--input", path, "--sink", "console"}).wait();
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  EXPECT_NE(r.err.find("estimates=3"), std::string::npos);
}

TEST(Binary, StdinPcmThenEof) {
  Child c({"run", "--input", "-", "--pcm-rate", "16000", "--sink", "console"});
  std::vector<std::int16_t> pcm(32000 + 100, 1000);
  ASSERT_EQ(::write(c.stdin_fd, pcm.data(), pcm.size() * 2), static_cast<ssize_t>(pcm.size() * 2));
  auto r = c.wait();
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.err.find("estimates=2"), std::string::npos);
}

TEST(Binary, SigintFlushesAndExits130) {
  Child c({"run", "--input", "-", "--pcm-rate", "16000", "--sink", "console"});
  std::vector<std::int16_t> pcm(16000 * 3, 2000);
  ASSERT_EQ(::write(c.stdin_fd, pcm.data(), pcm.size() * 2), static_cast<ssize_t>(pcm.size() * 2));
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  ::kill(c.pid, SIGINT);  // stdin stays open: only the signal ends the run
  std::string out_text, err_text;
  std::thread t([&] { err_text = Child::drain(c.stderr_fd); });
  out_text = Child::drain(c.stdout_fd);
  t.join();
  int status = 0;
  ::waitpid(c.pid, &status, 0);
  c.close_stdin();
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 130);
  EXPECT_EQ(std::count(out_text.begin(), out_text.end(), '\n'), 3);
  EXPECT_NE(err_text.find("summary:"), std::string::npos);
}

}  // namespace
}  // namespace sec::cli
