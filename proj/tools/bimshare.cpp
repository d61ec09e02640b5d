#include "bimshare/controller.hpp"
#include "bimshare/errors.hpp"
#include "bimshare/extract.hpp"
#include "bimshare/federation.hpp"
#include "bimshare/integrate.hpp"
#include "bimshare/party.hpp"
#include "bimshare/spf.hpp"
#include "bimshare/synth.hpp"
#include "bimshare/tcp.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace bimshare;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

// Flat key=value configuration (lines starting with '#' are comments).
std::map<std::string, std::string> load_config(const std::string& path) {
    std::map<std::string, std::string> cfg;
    std::istringstream in(slurp(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            s.erase(s.find_last_not_of(" \t\r") + 1);
            return s;
        };
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
        cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

std::pair<std::string, std::uint16_t> split_address(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw ValidationError("address must be host:port, got '" + addr + "'");
    return {addr.substr(0, colon),
            static_cast<std::uint16_t>(std::stoi(addr.substr(colon + 1)))};
}

struct PartyContext {
    PartyConfig config;
    std::string store_dir;
    std::string controller_addr;
};

PartyContext party_context(const std::string& config_path) {
    auto kv = load_config(config_path);
    PartyContext ctx;
    ctx.config.party_id = kv.count("party_id") ? kv["party_id"] : "party";
    ctx.config.manager_token = kv.count("manager_token") ? kv["manager_token"] : "manager";
    ctx.config.member_token = kv.count("member_token") ? kv["member_token"] : "member";
    ctx.config.controller_address = kv.count("listen") ? kv["listen"] : "";
    ctx.store_dir = kv.count("store") ? kv["store"] : "store";
    ctx.controller_addr = kv.count("controller") ? kv["controller"] : "";
    if (kv.count("requirements")) ctx.config.requirements_xml = slurp(kv["requirements"]);
    // A requirements view installed with define-requirements wins.
    fs::path installed = fs::path(ctx.store_dir) / "requirements.xml";
    if (fs::exists(installed)) ctx.config.requirements_xml = slurp(installed.string());
    return ctx;
}

PartyNode open_party(const Schema& schema, const PartyContext& ctx) {
    fs::path dir(ctx.store_dir);
    PartyNode node = fs::exists(dir / "model.ifc")
                         ? PartyNode::restore(schema, ctx.config, dir)
                         : PartyNode(schema, ctx.config);
    if (!ctx.controller_addr.empty()) {
        auto [host, port] = split_address(ctx.controller_addr);
        node.connect_controller(std::make_shared<TcpChannel>(host, port));
        node.set_peer_factory([](const std::string&, const std::string& address) {
            auto [h, p] = split_address(address);
            return std::make_shared<TcpChannel>(h, p);
        });
        node.set_sender([&node](const std::string& to, Message msg) {
            auto it = node.address_book().find(to);
            if (it == node.address_book().end()) return;
            auto [h, p] = split_address(it->second);
            TcpChannel(h, p).request(std::move(msg));
        });
        try {
            node.register_with_controller();
        } catch (const ConflictError&) {
            // already registered in a previous command
        }
    }
    return node;
}

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

void wait_for_signal() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

int error_exit_code(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return 2;
    if (dynamic_cast<const ValidationError*>(&e)) return 3;
    if (dynamic_cast<const NotFoundError*>(&e)) return 4;
    if (dynamic_cast<const ConflictError*>(&e)) return 5;
    if (dynamic_cast<const AuthError*>(&e)) return 6;
    if (dynamic_cast<const ProtocolError*>(&e)) return 7;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-party model sharing engine"};
    app.require_subcommand(1);

    std::string schema_path;
    app.add_option("--schema", schema_path, "Schema definition file (defaults to built-in)");

    std::string listen = "127.0.0.1:7450";
    auto* serve_controller = app.add_subcommand("serve-controller", "Run the global controller");
    serve_controller->add_option("--listen", listen, "host:port to listen on");

    std::string config_path = "party.conf";
    auto* serve_party = app.add_subcommand("serve-party", "Run a party server");
    serve_party->add_option("--config", config_path, "party configuration file")->required();

    std::string upload_file;
    auto* upload = app.add_subcommand("upload", "Store a model file in the party store");
    upload->add_option("file", upload_file, "SPF model file")->required();
    upload->add_option("--config", config_path, "party configuration file");

    std::string view_file, credential;
    auto* share = app.add_subcommand("share", "Share matching entities with other parties");
    share->add_option("view", view_file, "selector view XML")->required();
    share->add_option("--config", config_path, "party configuration file");
    share->add_option("--credential", credential, "credential (defaults to manager token)");

    auto* define_req = app.add_subcommand("define-requirements",
                                          "Install the party's requirement view");
    define_req->add_option("view", view_file, "requirements view XML")->required();
    define_req->add_option("--config", config_path, "party configuration file");

    std::string mode = "broad", parallel, out_file = "out.ifc";
    int workers = 4;
    auto* extract_cmd = app.add_subcommand("extract", "Extract a sub-model by view");
    extract_cmd->add_option("view", view_file, "view XML")->required();
    extract_cmd->add_option("--config", config_path, "party configuration file");
    extract_cmd->add_option("--mode", mode, "broad|strict")
        ->check(CLI::IsMember({"broad", "strict"}));
    extract_cmd->add_option("--parallel", parallel, "server|type|instance")
        ->check(CLI::IsMember({"server", "type", "instance"}));
    extract_cmd->add_option("--workers", workers, "parallel worker count");
    extract_cmd->add_option("-o,--output", out_file, "output SPF file");

    std::string base_file, sub_file;
    auto* integrate_cmd = app.add_subcommand("integrate", "Integrate a sub-model into a base");
    integrate_cmd->add_option("base", base_file, "base SPF file")->required();
    integrate_cmd->add_option("sub", sub_file, "sub-model SPF file")->required();
    integrate_cmd->add_option("-o,--output", out_file, "output SPF file");

    std::string controller_addr = "127.0.0.1:7450", owner_filter;
    auto* ls_index = app.add_subcommand("ls-index", "List the controller's shared-data index");
    ls_index->add_option("--controller", controller_addr, "controller host:port");
    ls_index->add_option("--party", owner_filter, "only entries owned by this party");

    std::string entity_id, to_party;
    auto* transfer = app.add_subcommand("transfer-owner", "Transfer entity ownership");
    transfer->add_option("entity_id", entity_id, "entity GlobalId")->required();
    transfer->add_option("to_party", to_party, "new owning party")->required();
    transfer->add_option("--controller", controller_addr, "controller host:port");
    transfer->add_option("--config", config_path, "party configuration file (current owner)");

    int demo_parties = 3;
    std::uint64_t demo_seed = 1;
    bool json_out = false;
    auto* demo = app.add_subcommand("demo", "Run the scripted multi-party federation demo");
    demo->add_option("--parties", demo_parties, "number of parties")->check(CLI::Range(1, 64));
    demo->add_option("--seed", demo_seed, "deterministic seed");
    demo->add_flag("--json", json_out, "machine-readable report");

    CLI11_PARSE(app, argc, argv);

    try {
        const Schema schema = schema_path.empty() ? Schema::load(mini_ifc_schema_text())
                                                  : Schema::load(slurp(schema_path));

        if (*serve_controller) {
            GlobalController controller(schema);
            auto [host, port] = split_address(listen);
            (void)host;
            TcpServer server(port, [&](const Message& m) { return controller.handle(m); });
            server.start();
            std::cout << "controller listening on " << listen << "\n";
            wait_for_signal();
            server.stop();
            return 0;
        }

        if (*serve_party) {
            PartyContext ctx = party_context(config_path);
            PartyNode node = open_party(schema, ctx);
            auto [host, port] = split_address(ctx.config.controller_address.empty()
                                                  ? "127.0.0.1:0"
                                                  : ctx.config.controller_address);
            (void)host;
            TcpServer server(port, [&](const Message& m) { return node.handle(m); });
            server.start();
            std::cout << node.id() << " listening on port " << server.port() << "\n";
            wait_for_signal();
            server.stop();
            node.checkpoint(ctx.store_dir);
            return 0;
        }

        if (*upload) {
            PartyContext ctx = party_context(config_path);
            PartyNode node = open_party(schema, ctx);
            std::size_t n = node.upload_model(slurp(upload_file));
            node.checkpoint(ctx.store_dir);
            std::cout << "stored " << n << " entities\n";
            return 0;
        }

        if (*share) {
            PartyContext ctx = party_context(config_path);
            PartyNode node = open_party(schema, ctx);
            std::string cred = credential.empty() ? ctx.config.manager_token : credential;
            std::size_t n = node.share(slurp(view_file), cred);
            node.checkpoint(ctx.store_dir);
            std::cout << "shared " << n << " entities\n";
            return 0;
        }

        if (*define_req) {
            PartyContext ctx = party_context(config_path);
            parse_mvd(slurp(view_file), schema); // validate before installing
            fs::create_directories(ctx.store_dir);
            spit((fs::path(ctx.store_dir) / "requirements.xml").string(), slurp(view_file));
            std::cout << "requirements installed\n";
            return 0;
        }

        if (*extract_cmd) {
            PartyContext ctx = party_context(config_path);
            PartyNode node = open_party(schema, ctx);
            ModelView view = parse_mvd(slurp(view_file), schema);
            ExtractionMode m =
                mode == "strict" ? ExtractionMode::Strict : ExtractionMode::Broad;
            if (!parallel.empty()) {
                ParallelLevel level = parallel == "server" ? ParallelLevel::Server
                                      : parallel == "type" ? ParallelLevel::Type
                                                           : ParallelLevel::Instance;
                SubModel sub = extract_parallel(node.model(), view, m, level, workers);
                spit(out_file, write_spf(sub.model));
                std::cout << "extracted " << sub.model.rooted_index().size() << " entities\n";
            } else {
                auto report = node.cross_party_extract(view, m);
                spit(out_file, write_spf(report.sub.model));
                for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
                std::cout << "extracted " << report.sub.model.rooted_index().size()
                          << " entities\n";
            }
            return 0;
        }

        if (*integrate_cmd) {
            Model base = parse_spf_model(slurp(base_file), schema);
            Model sub = parse_spf_model(slurp(sub_file), schema);
            Model out = integrate(base, sub);
            spit(out_file, write_spf(out));
            std::cout << "integrated model has " << out.rooted_index().size()
                      << " rooted entities\n";
            return 0;
        }

        if (*ls_index) {
            auto [host, port] = split_address(controller_addr);
            TcpChannel ch(host, port);
            Message req{MsgKind::Locate, 1, "cli",
                        {{"list", true}, {"owner", owner_filter}}};
            Message reply = expect_ok(ch.request(req));
            for (const auto& rec : reply.body["records"])
                std::cout << rec["entity_id"].get<std::string>() << '\t'
                          << rec["entity_type"].get<std::string>() << '\t'
                          << "owner=" << rec["owner_party"].get<std::string>() << '\t'
                          << "v" << rec["version"].get<int>() << '\t' << "replicas="
                          << rec["replica_servers"].size() << "\n";
            return 0;
        }

        if (*transfer) {
            PartyContext ctx = party_context(config_path);
            auto [host, port] = split_address(controller_addr);
            TcpChannel ch(host, port);
            Message req{MsgKind::TransferOwner, 1, ctx.config.party_id,
                        {{"entity_id", entity_id}, {"to", to_party}}};
            Message reply = expect_ok(ch.request(req));
            std::cout << entity_id << " now owned by "
                      << reply.body["owner_party"].get<std::string>() << " (v"
                      << reply.body["version"].get<int>() << ")\n";
            return 0;
        }

        if (*demo) {
            nlohmann::json report = run_demo(schema, demo_parties, demo_seed);
            if (json_out) {
                std::cout << report.dump(2) << "\n";
            } else {
                std::cout << "parties: " << report["parties"] << "\n";
                for (const auto& [id, n] : report["entity_counts"].items())
                    std::cout << "  " << id << ": " << n << " entities, shared "
                              << report["index_counts"][id]["shared"] << ", external "
                              << report["index_counts"][id]["external"] << "\n";
                std::cout << "extract ms: sequential "
                          << report["extract_ms"].value("sequential", 0.0) << ", parallel "
                          << report["extract_ms"].value("parallel", 0.0) << "\n";
                std::cout << "verification: "
                          << (report["verification"]["passed"].get<bool>() ? "passed" : "FAILED")
                          << "\n";
                for (const auto& f : report["verification"]["failures"])
                    std::cout << "  failure: " << f.get<std::string>() << "\n";
            }
            return report["verification"]["passed"].get<bool>() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return error_exit_code(e);
    }
    return 0;
}
