export * from './tensorio';
export * from './manifest';
export * from './codec';
export * from './loss';
export * from './model';
export * from './checkpoint';
export * from './train';
export * from './export';
export * from './protocol';
