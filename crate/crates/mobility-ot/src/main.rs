fn main() {
    // CLI entry point, filled in by the cli module.
    eprintln!("not yet wired");
    std::process::exit(1);
}
