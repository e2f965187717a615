// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(fpdisj_cli::main_with(std::env::args_os().collect()));
}
