/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const correctionNorms: (a: number, b: number, c: number) => [number, number, number, number];
export const lemma1Text: (a: number) => [number, number, number, number];
export const shapeLabels: (a: number) => [number, number, number, number];
export const shapeSlice: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
