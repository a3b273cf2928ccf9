// Shapes mirroring the service's response models. Every number the UI shows
// comes from one of these fields; the client never derives acceptance itself.
export const BUCKET_ORDER = ['one', 'two', 'three', 'four_plus'];
export const BUCKET_LABELS = {
    one: '1 goal',
    two: '2 goals',
    three: '3 goals',
    four_plus: '4+ goals',
};
