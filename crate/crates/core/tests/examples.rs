macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $name() {
            $name::run().expect(concat!($file, " should run"));
        }
    };
}

example!(ingest, "ingest.rs");
example!(explain, "explain.rs");
example!(similarity, "similarity.rs");
example!(fidelity, "fidelity.rs");
example!(stability, "stability.rs");
example!(consistency, "consistency.rs");
example!(cot, "cot.rs");
example!(preprompt, "preprompt.rs");
example!(export, "export.rs");
