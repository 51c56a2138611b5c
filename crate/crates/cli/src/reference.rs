//! Markdown flag reference rendered from the clap definition, so the page
//! cannot drift from `--help`.

use std::fmt::Write;

use clap::{Arg, CommandFactory};

use crate::Cli;

fn flag_line(out: &mut String, arg: &Arg) {
    let Some(long) = arg.get_long() else {
        return;
    };
    if matches!(long, "help" | "version") {
        return;
    }
    let value = if arg.get_num_args().is_some_and(|r| r.takes_values()) {
        let names = arg.get_value_names().map(|v| v.join(" ")).unwrap_or_else(|| arg.get_id().to_string().to_uppercase());
        format!(" <{names}>")
    } else {
        String::new()
    };
    let help = arg.get_help().map(|h| h.to_string()).unwrap_or_default();
    let mut extra = Vec::new();
    let defaults: Vec<String> = arg.get_default_values().iter().map(|v| v.to_string_lossy().into_owned()).collect();
    if !defaults.is_empty() {
        extra.push(format!("default `{}`", defaults.join(",")));
    }
    let choices: Vec<String> = arg.get_possible_values().iter().map(|p| p.get_name().to_string()).collect();
    if !choices.is_empty() && arg.get_action().takes_values() {
        extra.push(format!("one of `{}`", choices.join("`, `")));
    }
    if let Some(env) = arg.get_env() {
        extra.push(format!("env `{}`", env.to_string_lossy()));
    }
    if arg.is_required_set() {
        extra.push("required".into());
    }
    let tail = if extra.is_empty() { String::new() } else { format!(" ({})", extra.join("; ")) };
    writeln!(out, "- `--{long}{value}`: {help}{tail}").unwrap();
}

/// The full reference page.
pub fn render() -> String {
    let mut cmd = Cli::command();
    cmd.build();
    let mut out = String::new();
    writeln!(out, "# `spaghetto` command reference\n").unwrap();
    writeln!(out, "Generated from the argument parser; regenerate with `UPDATE_REFERENCE=1 cargo test -p spaghetto-cli reference`.\n").unwrap();
    if let Some(about) = cmd.get_about() {
        writeln!(out, "{about}\n").unwrap();
    }
    writeln!(out, "Every flag is long-form. Output paths are relative to `--out-dir`.\n").unwrap();
    writeln!(out, "Exit codes: 0 success, 1 I/O error or failed selftest, 2 usage error, 3 cap exceeded, 4 numeric failure.\n").unwrap();
    writeln!(out, "## Global flags\n").unwrap();
    for arg in cmd.get_arguments().filter(|a| a.is_global_set()) {
        flag_line(&mut out, arg);
    }
    for sub in cmd.get_subcommands().filter(|s| s.get_name() != "help") {
        writeln!(out, "\n## `spaghetto {}`\n", sub.get_name()).unwrap();
        if let Some(about) = sub.get_long_about().or(sub.get_about()) {
            writeln!(out, "{about}\n").unwrap();
        }
        for arg in sub.get_arguments().filter(|a| !a.is_global_set()) {
            flag_line(&mut out, arg);
        }
    }
    out
}
