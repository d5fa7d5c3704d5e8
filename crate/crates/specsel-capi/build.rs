fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();

    let result = cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(cbindgen::Config {
            language: cbindgen::Language::C,
            cpp_compat: true,
            include_guard: Some("SPECSEL_H".into()),
            include_version: false,
            documentation: true,
            enumeration: cbindgen::EnumConfig {
                prefix_with_name: true,
                ..Default::default()
            },
            ..Default::default()
        })
        .generate()
        .map(|data| {
            data.write_to_file(format!("{crate_dir}/include/specsel.h"));
        });

    if result.is_ok() {
        println!("cargo:rerun-if-changed=src/lib.rs");
    }
}
