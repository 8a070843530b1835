#pragma once

namespace mrfmle {

// Command-line entry point (subcommands: fit, infer, select, simulate,
// verify). Returns 0 on success, 1 on validation/usage errors, 2 on runtime
// failures. Kept in the library so the thin tool binary stays link-only.
int cli_main(int argc, char** argv);

}  // namespace mrfmle
