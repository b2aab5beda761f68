#include <iostream>

#include "dtstop/cli.hpp"

int main(int argc, char** argv) {
    try {
        const dtstop::CommandLine cl = dtstop::parse_command_line(argc, argv);
        if (cl.help) {
            std::cout << cl.help_text;
            return 0;
        }
        const auto record = dtstop::run(cl.config, std::cout, cl.threads);
        if (cl.config.command == "validate" && !record["results"]["ok"].get<bool>()) return 3;
        return 0;
    } catch (const dtstop::ConfigError& e) {
        std::cerr << "dtstop: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dtstop: error: " << e.what() << "\n";
        return 1;
    }
}
