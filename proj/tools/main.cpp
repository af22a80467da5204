// oneplus: run 1+1 protection scenarios, check wire conformance vectors, and
// evaluate the sequence-space delay bound.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "oneplus/netsim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;  // conformance vectors mismatched
constexpr int kExitValidation = 2;   // bad input: missing file, parse or validation error
constexpr int kExitRuntime = 3;      // I/O or internal failure

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_one(const std::string& scenario_path, const std::string& mode_name,
            std::optional<uint64_t> seed, const std::string& out_dir, bool per_packet,
            bool verbose) {
    if (!std::filesystem::exists(scenario_path)) {
        std::cerr << "error: scenario file not found: " << scenario_path << "\n";
        return kExitValidation;
    }
    oneplus::Scenario sc;
    try {
        sc = oneplus::load_config(read_file(scenario_path));
        oneplus::validate(sc);
    } catch (const oneplus::Error& e) {
        std::cerr << "error: " << scenario_path << ": " << e.what() << "\n";
        return kExitValidation;
    }

    oneplus::RunOptions opts;
    opts.seed = seed;
    if (mode_name == "protected") {
        opts.mode = oneplus::ForwardingMode::Protected;
    } else if (mode_name == "unprotected") {
        opts.mode = oneplus::ForwardingMode::Unprotected;
    } else if (mode_name == "plain") {
        opts.mode = oneplus::ForwardingMode::Plain;
    } else {
        std::cerr << "error: unknown mode '" << mode_name << "'\n";
        return kExitValidation;
    }

    oneplus::MetricsRecord m;
    try {
        m = oneplus::run(sc, opts);
    } catch (const oneplus::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        std::filesystem::create_directories(out_dir);
        std::ofstream flows(out_dir + "/flows.csv");
        oneplus::write_flows_csv(m, flows);
        std::ofstream summary(out_dir + "/summary.txt");
        oneplus::write_summary(m, summary);
        if (per_packet) {
            std::ofstream packets(out_dir + "/packets.csv");
            oneplus::write_packets_csv(m, packets);
        }
        if (!flows || !summary) throw std::runtime_error("write failed in " + out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }

    if (verbose) {
        oneplus::write_summary(m, std::cout);
    } else {
        for (const auto& f : m.flows) {
            std::cout << f.name << ": sent " << f.sent << " delivered " << f.delivered
                      << " lost " << f.lost << "\n";
        }
    }
    if (!m.ledger.conserved()) {
        std::cerr << "error: copy accounting does not balance\n";
        return kExitRuntime;
    }
    return kExitOk;
}

// One or more scenarios; with --parallel each runs on its own thread into its
// own subdirectory. Nothing is shared between runs.
int cmd_run(const std::vector<std::string>& scenario_paths, const std::string& mode_name,
            std::optional<uint64_t> seed, const std::string& out_dir, bool per_packet,
            bool verbose, bool parallel) {
    if (scenario_paths.size() == 1) {
        return run_one(scenario_paths[0], mode_name, seed, out_dir, per_packet, verbose);
    }
    std::vector<std::string> outs;
    for (const auto& path : scenario_paths) {
        outs.push_back(out_dir + "/" + std::filesystem::path(path).stem().string());
    }
    std::vector<int> codes(scenario_paths.size(), kExitOk);
    if (parallel) {
        std::vector<std::thread> threads;
        for (size_t i = 0; i < scenario_paths.size(); ++i) {
            threads.emplace_back([&, i] {
                codes[i] = run_one(scenario_paths[i], mode_name, seed, outs[i], per_packet, false);
            });
        }
        for (auto& t : threads) t.join();
    } else {
        for (size_t i = 0; i < scenario_paths.size(); ++i) {
            codes[i] = run_one(scenario_paths[i], mode_name, seed, outs[i], per_packet, verbose);
        }
    }
    int worst = kExitOk;
    for (size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] != kExitOk) {
            std::cerr << "scenario " << scenario_paths[i] << " exited " << codes[i] << "\n";
            worst = std::max(worst, codes[i]);
        }
    }
    return worst;
}

// Each vector line is `name <whitespace> hex-bytes`. The packet must parse
// and its bytes must survive a parse/reserialize round trip unchanged, with
// an 8-byte protection header where one is present.
int cmd_vectors(const std::string& path) {
    if (!std::filesystem::exists(path)) {
        std::cerr << "error: vector file not found: " << path << "\n";
        return kExitValidation;
    }
    std::ifstream in(path);
    std::string line;
    size_t total = 0, failed = 0, lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string name, hex;
        if (!(ls >> name >> hex)) continue;  // blank line
        ++total;
        std::vector<uint8_t> bytes;
        if (!oneplus::from_hex(hex, bytes)) {
            std::cout << "FAIL " << name << " (line " << lineno << "): invalid hex\n";
            ++failed;
            continue;
        }
        try {
            oneplus::Packet p = oneplus::parse_packet(bytes);
            if (p.bytes != bytes) {
                std::cout << "FAIL " << name << ": bytes changed across parse\n";
                ++failed;
                continue;
            }
            if (p.prot) {
                auto reser = oneplus::serialize_protection_header(*p.prot);
                std::vector<uint8_t> on_wire(bytes.begin() + oneplus::kIpv4HeaderSize,
                                             bytes.begin() + oneplus::kIpv4HeaderSize +
                                                 oneplus::kProtectionHeaderSize);
                if (!std::equal(reser.begin(), reser.end(), on_wire.begin())) {
                    std::cout << "FAIL " << name << ": protection header reserialization differs\n";
                    ++failed;
                    continue;
                }
            }
            if (p.stack == oneplus::StackTag::Protected) {
                // Re-encapsulating the stripped inner must reproduce the vector.
                oneplus::Packet inner =
                    oneplus::strip_protection(oneplus::strip_outer_ip(p));
                oneplus::Packet re = oneplus::encapsulate(inner, *p.prot, p.outer->src,
                                                          p.outer->dst, p.outer->protocol);
                // The original outer TTL may differ from the tunnel default.
                re.bytes[8] = bytes[8];
                oneplus::write_be16(re.bytes, 10, oneplus::ipv4_checksum(re.bytes));
                if (re.bytes != bytes) {
                    std::cout << "FAIL " << name << ": decapsulate/encapsulate round trip differs\n";
                    ++failed;
                    continue;
                }
            }
            std::cout << "PASS " << name << "\n";
        } catch (const oneplus::Error& e) {
            std::cout << "FAIL " << name << ": " << e.what() << "\n";
            ++failed;
        }
    }
    if (total == 0) {
        std::cout << "warning: no vectors found in " << path << "\n";
    }
    std::cout << total - failed << "/" << total << " vectors passed\n";
    return failed == 0 ? kExitOk : kExitCheckFailed;
}

int cmd_bound(uint64_t sn_space, uint64_t window, uint64_t packet_bytes, double rate_bps) {
    oneplus::SeqParams p{sn_space, window};
    double bound;
    try {
        bound = oneplus::max_compensable_delay(p, static_cast<double>(packet_bytes) * 8.0,
                                               rate_bps);
    } catch (const oneplus::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    std::printf("max compensable delay difference: %.9f s\n", bound);
    std::printf("(N=%llu, W=%llu, packet=%llu bytes, rate=%.0f bit/s)\n",
                static_cast<unsigned long long>(sn_space),
                static_cast<unsigned long long>(window),
                static_cast<unsigned long long>(packet_bytes), rate_bps);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1+1 path protection for IP: duplicate, deduplicate, simulate"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "simulate scenarios and write metrics");
    std::vector<std::string> scenario_paths;
    std::string out_dir = "out", mode = "protected";
    std::optional<uint64_t> seed;
    bool per_packet = false, verbose = false, parallel = false;
    run->add_option("--scenario", scenario_paths, "scenario document(s) (json)")->required();
    run->add_option("--mode", mode, "forwarding mode: protected|unprotected|plain")
        ->default_val("protected");
    run->add_option("--seed", seed, "override the scenario seed");
    run->add_option("--out", out_dir,
                    "output directory (per-scenario subdirectories when several)")
        ->default_val("out");
    run->add_flag("--per-packet", per_packet, "also write packets.csv");
    run->add_flag("--parallel", parallel, "run multiple scenarios on separate threads");
    run->add_flag("-v,--verbose", verbose, "print the full summary");

    auto* vectors = app.add_subcommand("vectors", "check wire conformance vectors");
    std::string vector_path;
    vectors->add_option("--file", vector_path, "vector file (name hex per line)")->required();

    auto* bound = app.add_subcommand("bound", "compute the max compensable delay difference");
    uint64_t sn_space = uint64_t{1} << 32;
    uint64_t window = uint64_t{1} << 31;
    uint64_t packet_bytes = 40;
    double rate = 1e12;
    bound->add_option("--sn-space", sn_space, "sequence number space N")->default_val(sn_space);
    bound->add_option("--window", window, "acceptance window W")->default_val(window);
    bound->add_option("--packet-bytes", packet_bytes, "packet size in bytes")
        ->default_val(packet_bytes);
    bound->add_option("--rate", rate, "line rate in bit/s")->default_val(rate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(scenario_paths, mode, seed, out_dir, per_packet, verbose, parallel);
        }
        if (vectors->parsed()) {
            return cmd_vectors(vector_path);
        }
        if (bound->parsed()) {
            return cmd_bound(sn_space, window, packet_bytes, rate);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
