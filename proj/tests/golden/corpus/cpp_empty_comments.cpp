//
/**/
