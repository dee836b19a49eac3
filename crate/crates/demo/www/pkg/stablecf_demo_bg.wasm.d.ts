/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_jacobitraceview_free: (a: number, b: number) => void;
export const densityCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
export const jacobiTrace: (a: number, b: number) => [number, number, number];
export const jacobitraceview_converged: (a: number) => number;
export const jacobitraceview_residuals: (a: number) => [number, number];
export const jacobitraceview_rho_abs_r_alpha: (a: number) => number;
export const jacobitraceview_rho_r: (a: number) => number;
export const sumParams: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
