//! Test-only helpers shared by the integration targets.

#![allow(dead_code)]

/// An independent SDES written over '0'/'1' strings, table by table. It
/// shares no code with the library and serves as the cipher oracle.
pub mod reference {
    const P10: [usize; 10] = [3, 5, 2, 7, 4, 10, 1, 9, 8, 6];
    const P8: [usize; 8] = [6, 3, 7, 4, 8, 5, 10, 9];
    const IP: [usize; 8] = [2, 6, 3, 1, 4, 8, 5, 7];
    const IP_INV: [usize; 8] = [4, 1, 3, 5, 7, 2, 8, 6];
    const EP: [usize; 8] = [4, 1, 2, 3, 2, 3, 4, 1];
    const P4: [usize; 4] = [2, 4, 3, 1];
    const S0: [[u8; 4]; 4] = [[1, 0, 3, 2], [3, 2, 1, 0], [0, 2, 1, 3], [3, 1, 3, 2]];
    const S1: [[u8; 4]; 4] = [[0, 1, 2, 3], [2, 0, 1, 3], [3, 0, 1, 0], [2, 1, 0, 3]];

    fn permute(s: &str, table: &[usize]) -> String {
        let chars: Vec<char> = s.chars().collect();
        table.iter().map(|&i| chars[i - 1]).collect()
    }

    fn rotate_left(s: &str, n: usize) -> String {
        format!("{}{}", &s[n..], &s[..n])
    }

    fn shift_halves(s: &str, n: usize) -> String {
        format!("{}{}", rotate_left(&s[..5], n), rotate_left(&s[5..], n))
    }

    fn xor(a: &str, b: &str) -> String {
        a.chars()
            .zip(b.chars())
            .map(|(x, y)| if x == y { '0' } else { '1' })
            .collect()
    }

    fn sbox(nibble: &str, table: &[[u8; 4]; 4]) -> String {
        let c: Vec<char> = nibble.chars().collect();
        let row = usize::from_str_radix(&format!("{}{}", c[0], c[3]), 2).unwrap();
        let col = usize::from_str_radix(&format!("{}{}", c[1], c[2]), 2).unwrap();
        format!("{:02b}", table[row][col])
    }

    pub fn subkeys(key: &str) -> (String, String) {
        let p = permute(key, &P10);
        let first = shift_halves(&p, 1);
        let second = shift_halves(&first, 2);
        (permute(&first, &P8), permute(&second, &P8))
    }

    pub fn f(right: &str, subkey: &str) -> String {
        let x = xor(&permute(right, &EP), subkey);
        let joined = format!("{}{}", sbox(&x[..4], &S0), sbox(&x[4..], &S1));
        permute(&joined, &P4)
    }

    fn fk(block: &str, subkey: &str) -> String {
        format!(
            "{}{}",
            xor(&block[..4], &f(&block[4..], subkey)),
            &block[4..]
        )
    }

    fn sw(block: &str) -> String {
        format!("{}{}", &block[4..], &block[..4])
    }

    pub fn encrypt(plain: &str, key: &str) -> String {
        let (k1, k2) = subkeys(key);
        permute(&fk(&sw(&fk(&permute(plain, &IP), &k1)), &k2), &IP_INV)
    }

    pub fn decrypt(cipher: &str, key: &str) -> String {
        let (k1, k2) = subkeys(key);
        permute(&fk(&sw(&fk(&permute(cipher, &IP), &k2)), &k1), &IP_INV)
    }
}

/// L1 distance computed by walking every n-gram of the alphabet product in
/// the given symbol order, counting occurrences directly in the text.
pub fn l1_by_enumeration(
    table: &sdes_core::langmodel::FrequencyTable,
    text: &str,
    n: usize,
    symbols: &[char],
) -> f64 {
    let chars: Vec<char> = text.chars().collect();
    let grams = (chars.len() + 1 - n) as f64;
    let mut total = 0.0;
    let mut index = vec![0usize; n];
    loop {
        let gram: String = index.iter().map(|&i| symbols[i]).collect();
        let gram_chars: Vec<char> = gram.chars().collect();
        let count = chars
            .windows(n)
            .filter(|w| *w == gram_chars.as_slice())
            .count();
        total += (table.get(&gram) - count as f64 / grams).abs();
        let mut pos = n;
        loop {
            if pos == 0 {
                return total;
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < symbols.len() {
                break;
            }
            index[pos] = 0;
        }
    }
}
