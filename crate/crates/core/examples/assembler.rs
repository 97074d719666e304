//! Assembles a small program, disassembles it again and shows the
//! diagnostics the assembler produces for broken sources.
//!
//! ```bash
//! cargo run --example assembler
//! ```

use pels::asm::{assemble_str, disassemble, validate_against_capacity};

const SOURCE: &str = "\
# blink output 0 four times, pausing between toggles
blink:  action grp0.toggle, 0b1
        wait 10
        loop 3, blink
        set 0x4, 0x80000000     # flag completion in a status register
";

fn main() {
    let program = assemble_str(SOURCE).expect("source assembles");
    println!(
        "assembled {} commands, image {}",
        program.len(),
        hex::encode(program.to_image())
    );
    println!("--- disassembly ---\n{}", disassemble(&program));
    validate_against_capacity(&program, 4).expect("fits a 4-line SCM");

    let broken = [
        "frob 0, 1",
        "set 0",
        "write 0, 0x1_0000_0000",
        "jif eq, 0, nowhere",
        "a: wait 1\nb: wait 1\nloop 1, b\nloop 1, a",
        "loop 1, later\nlater: wait 1",
    ];
    println!("--- diagnostics ---");
    for src in broken {
        let err = assemble_str(src).unwrap_err();
        println!("{:<4} {err}", err.code());
    }
    let five = assemble_str(&"wait 1\n".repeat(5)).unwrap();
    let err = validate_against_capacity(&five, 4).unwrap_err();
    println!("{:<4} {err}", err.code());
}
